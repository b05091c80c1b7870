//! Zero-padded "same-size" convolution of a grid slice with a centred
//! kernel, direct for small inputs and FFT-based above a size threshold.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Signals at least this long go through the FFT path.
pub const FFT_THRESHOLD: usize = 1 << 12;
/// Kernels this short are always summed directly; the FFT buys nothing.
pub const SHORT_KERNEL: usize = 64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// A kernel `k[m]` for offsets `m = -half..=half`, stored at `m + half`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernel {
    pub taps: Vec<f64>,
    pub half: usize,
}

impl CenteredKernel {
    pub fn new(taps: Vec<f64>) -> Self {
        assert!(taps.len() % 2 == 1, "centred kernel needs odd length");
        let half = taps.len() / 2;
        Self { taps, half }
    }

    /// Builds taps from a function of the signed offset.
    pub fn from_fn(half: usize, f: impl Fn(i64) -> f64) -> Self {
        let h = half as i64;
        Self::new((-h..=h).map(f).collect())
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }
}

/// `out[i] = sum_m k[m] s[i - m]`, zero outside the signal.
pub fn convolve(signal: &[f64], kernel: &CenteredKernel) -> Vec<f64> {
    if signal.len() < FFT_THRESHOLD || kernel.taps.len() <= SHORT_KERNEL {
        convolve_direct(signal, kernel)
    } else {
        convolve_fft(signal, kernel)
    }
}

pub fn convolve_direct(signal: &[f64], kernel: &CenteredKernel) -> Vec<f64> {
    let n = signal.len() as i64;
    let h = kernel.half as i64;
    let mut out = vec![0.0; signal.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as i64;
        // m ranges so that 0 <= i - m < n
        let m_lo = (-h).max(i - n + 1);
        let m_hi = h.min(i);
        let mut acc = 0.0;
        for m in m_lo..=m_hi {
            acc += kernel.taps[(m + h) as usize] * signal[(i - m) as usize];
        }
        *o = acc;
    }
    out
}

pub fn convolve_fft(signal: &[f64], kernel: &CenteredKernel) -> Vec<f64> {
    let n = signal.len();
    let k = kernel.taps.len();
    let size = (n + k - 1).next_power_of_two();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let mut a: Vec<Complex<f64>> = signal
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut b: Vec<Complex<f64>> = kernel
        .taps
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    // full linear convolution index i + half corresponds to output i
    (0..n).map(|i| a[i + kernel.half].re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fft_and_direct_agree() {
        let n = 5000;
        let s: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.013).sin() + (i % 7) as f64 * 0.1).collect();
        let k = CenteredKernel::from_fn(300, |m| (-(m as f64 / 80.0).powi(2)).exp() / 140.0);
        let a = convolve_direct(&s, &k);
        let b = convolve_fft(&s, &k);
        let err = a.iter().zip(&b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn identity_kernel() {
        let s = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(convolve(&s, &CenteredKernel::new(vec![1.0])), s);
        let shift = CenteredKernel::new(vec![0.0, 0.0, 1.0]);
        // k[+1] = 1 moves values one step right
        assert_eq!(convolve_direct(&s, &shift), vec![0.0, 1.0, -2.0, 3.5]);
        assert_eq!(
            convolve_fft(&s, &shift)
                .iter()
                .map(|v| (v * 1e12).round() / 1e12)
                .collect::<Vec<_>>(),
            vec![0.0, 1.0, -2.0, 3.5]
        );
    }

    proptest! {
        #[test]
        fn paths_agree_on_random_input(
            s in prop::collection::vec(-10.0f64..10.0, 10..200),
            k in prop::collection::vec(-1.0f64..1.0, 0..20),
        ) {
            let mut taps = k.clone();
            taps.push(0.5);
            taps.extend(k.iter().rev());
            let ker = CenteredKernel::new(taps);
            let a = convolve_direct(&s, &ker);
            let b = convolve_fft(&s, &ker);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
