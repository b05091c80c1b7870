//! Gaussian heat semigroup `K(t) * h` for `1/2 Laplacian`, its gradient, and
//! the explicit constants bounding the mild solution.
//!
//! Kernels are discretised two ways. When the kernel is resolved
//! (`sqrt(t) >= h`) it is sampled and weighted by `h`, which is spectrally
//! accurate for smooth data. Below that it is averaged over grid cells, so
//! that the discrete mass stays exactly one even for `t << h^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::convolution::{convolve, CenteredKernel};
use crate::error::{domain, Error, Result};
use crate::exponents::ExponentPair;
use crate::grid::Grid1d;
use crate::special::{beta, gamma, norm_interval};

/// Kernel support in standard deviations.
const KERNEL_SIGMAS: f64 = 9.0;

pub fn heat_kernel(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

fn half_width(t: f64, h: f64, max_half: usize) -> usize {
    let w = (KERNEL_SIGMAS * t.sqrt() / h).ceil() as usize + 1;
    w.min(max_half).max(1)
}

/// Discrete weights of `K(t) *` on spacing `h`, at most `max_half` offsets
/// each side.
pub fn heat_taps(t: f64, h: f64, max_half: usize) -> CenteredKernel {
    let half = half_width(t, h, max_half);
    let sd = t.sqrt();
    if sd >= h {
        CenteredKernel::from_fn(half, |m| h * heat_kernel(t, m as f64 * h))
    } else {
        CenteredKernel::from_fn(half, |m| {
            let m = m as f64;
            norm_interval((m - 0.5) * h / sd, (m + 0.5) * h / sd)
        })
    }
}

/// Discrete weights of `d/dx K(t) *`; applied with the same convention as
/// [`heat_taps`].
///
/// In the cell-averaged regime the gradient is a centred difference of the
/// smoothed slice, so it tends to the difference quotient of the data as
/// `t -> 0` rather than to zero.
pub fn grad_taps(t: f64, h: f64, max_half: usize) -> CenteredKernel {
    if t.sqrt() >= h {
        let half = half_width(t, h, max_half);
        CenteredKernel::from_fn(half, |m| {
            let x = m as f64 * h;
            -h * x / t * heat_kernel(t, x)
        })
    } else {
        let w = heat_taps(t, h, max_half.saturating_sub(1).max(1));
        let wh = w.half as i64;
        let at = |m: i64| if m.abs() <= wh { w.taps[(m + wh) as usize] } else { 0.0 };
        CenteredKernel::from_fn(w.half + 1, |m| (at(m + 1) - at(m - 1)) / (2.0 * h))
    }
}

fn check_time(t: f64, grid: &Grid1d, strict: bool) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("heat kernel time must be positive, got {t}"));
    }
    let radius = 0.5 * (grid.x_max() - grid.x_min);
    if t.sqrt() > radius / 3.0 {
        let msg = format!(
            "kernel width sqrt(t) = {:.3} exceeds a third of the half-width {radius}",
            t.sqrt()
        );
        if strict {
            return Err(Error::Truncation(msg));
        }
        log::warn!("{msg}");
    }
    Ok(())
}

pub fn heat_convolve(t: f64, grid: &Grid1d, h: &[f64], strict: bool) -> Result<Vec<f64>> {
    check_time(t, grid, strict)?;
    Ok(convolve(h, &heat_taps(t, grid.h, grid.n - 1)))
}

pub fn grad_heat_convolve(t: f64, grid: &Grid1d, h: &[f64], strict: bool) -> Result<Vec<f64>> {
    check_time(t, grid, strict)?;
    Ok(convolve(h, &grad_taps(t, grid.h, grid.n - 1)))
}

/// `||K(t)||_{L^r(R^d)}`.
pub fn kernel_lr_norm(t: f64, r: f64, d: u32) -> f64 {
    let d = d as f64;
    if r.is_infinite() {
        return (2.0 * PI * t).powf(-0.5 * d);
    }
    (2.0 * PI * t).powf(-0.5 * d + 0.5 * d / r) * r.powf(-0.5 * d / r)
}

/// `||d/dx K(t)||_{L^r(R)}` in one dimension.
pub fn grad_kernel_lr_norm(t: f64, r: f64) -> f64 {
    if r.is_infinite() {
        // max of |x|/t K at x = sqrt(t)
        return (-0.5f64).exp() / (t * (2.0 * PI).sqrt());
    }
    let integral = t.powf(-r)
        * (2.0 * PI * t).powf(-0.5 * r)
        * (2.0 * t / r).powf(0.5 * (r + 1.0))
        * gamma(0.5 * (r + 1.0));
    integral.powf(1.0 / r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub exps: ExponentPair,
    /// Gradient constant `C(p,d)`.
    pub c_grad: f64,
    /// Sup-norm constant, kernel norm times Beta factor.
    pub c_sup: f64,
    /// `max(c_sup sqrt(T), c_grad)`.
    pub c0: f64,
    /// Time-Hoelder exponent in `W^{1,p}`.
    pub theta: f64,
}

impl KernelConstants {
    /// `1 / C0`: transport fields below this weighted norm give a
    /// contraction.
    pub fn contraction_threshold(&self) -> f64 {
        1.0 / self.c0
    }

    /// Threshold used for the transform PDE, `1 / (2 C0)`.
    pub fn transform_threshold(&self) -> f64 {
        0.5 / self.c0
    }

    /// `C0 ||f|| / (1 - C0 ||g||)`, infinite when `C0 ||g|| >= 1`.
    pub fn solution_bound(&self, f_norm: f64, g_norm: f64) -> f64 {
        let r = self.c0 * g_norm;
        if r >= 1.0 {
            f64::INFINITY
        } else {
            self.c0 * f_norm / (1.0 - r)
        }
    }
}

/// Exact `theta` formula; negative values for `q < 2` are clamped to zero.
pub fn holder_theta(q: f64) -> f64 {
    (2.0 * (q - 1.0) * (q - 2.0) / ((3.0 * q - 2.0) * q)).clamp(0.0, 1.0)
}

pub fn compute_constants(exps: &ExponentPair) -> Result<KernelConstants> {
    let ExponentPair { p, q, d, horizon } = *exps;
    if !(q > 1.0) {
        return domain(format!("q must exceed 1, got {q}"));
    }
    if !(p > 1.0) || p.is_infinite() {
        return domain(format!("p must lie in (1, inf), got {p}"));
    }
    if !exps.is_critical() {
        return domain(format!(
            "exponents are not critical: 2/q + d/p - 1 = {:e}",
            exps.criticality_gap()
        ));
    }
    let df = d as f64;
    let c_grad = PI.powf(-(df + p - 1.0) / (2.0 * p))
        * 2f64.powf((p - df) / (2.0 * p))
        * gamma((2.0 * p - 1.0) / (2.0 * p - 2.0)).powf((p - 1.0) / p)
        * ((p - 1.0) / p).powf(((df + 1.0) * p - df) / (2.0 * p))
        * beta(1.0 - 1.0 / q, 1.0 / q);
    let pc = exps.conjugate_p();
    let c_sup = pc.powf(-df / (2.0 * pc))
        * (2.0 * PI).powf(-df / (2.0 * p))
        * beta(1.0 - 1.0 / q, 1.0 / q + 0.5);
    let c0 = (c_sup * horizon.sqrt()).max(c_grad);
    Ok(KernelConstants {
        exps: *exps,
        c_grad,
        c_sup,
        c0,
        theta: holder_theta(q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_reference_values() {
        // (p, q, d, C_grad, C_sup) from a 40-digit evaluation
        let cases = [
            (2.0, 4.0, 1, 1.668_581_432_959_103_114_879_481_113_058_405_022_979, 0.899_953_736_161_125_688_526_348_103_709_618_307_587_7),
            (1.5, 6.0, 1, 1.912_915_391_171_327_249_951_002_417_655_275_339_99, 0.778_293_487_381_117_839_306_839_185_655_995_021_141_8),
            (4.0, 4.0, 2, 1.704_483_234_348_717_160_155_096_397_295_434_613_534, 0.862_528_850_791_230_789_481_251_402_255_398_811_536_8),
            (3.0, 6.0, 2, 1.918_783_047_252_832_659_730_692_463_096_532_673_603, 0.713_295_415_590_547_094_066_226_016_424_788_591_436_3),
            (4.0 / 3.0, 8.0, 1, 2.280_266_361_455_782_778_883_632_484_109_842_469_249, 0.744_516_507_359_175_364_712_534_385_384_362_884_209_2),
        ];
        for (p, q, d, cg, cs) in cases {
            let k = compute_constants(&ExponentPair::new(p, q, d, 1.0).unwrap()).unwrap();
            assert!(((k.c_grad - cg) / cg).abs() < 1e-12, "C_grad p={p} q={q}");
            assert!(((k.c_sup - cs) / cs).abs() < 1e-12, "C_sup p={p} q={q}");
            assert!(k.c0 >= k.c_grad && k.c0 >= k.c_sup);
        }
    }

    #[test]
    fn theta_formula() {
        assert!((holder_theta(4.0) - 0.3).abs() < 1e-15);
        assert_eq!(holder_theta(2.0), 0.0);
        assert_eq!(holder_theta(1.5), 0.0);
        assert!(holder_theta(1e9) < 2.0 / 3.0);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(compute_constants(&ExponentPair::new(2.0, 1.0, 1, 1.0).unwrap()).is_err());
        assert!(compute_constants(&ExponentPair::new(2.0, 3.0, 1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn kernel_norms_match_closed_forms() {
        // ||K(t)||_{p'} enters C_sup with p = 2
        assert!((kernel_lr_norm(1.0, 2.0, 1) - (4.0 * PI).powf(-0.25)).abs() < 1e-15);
        assert!((grad_kernel_lr_norm(1.0, 2.0) - 0.375_562_772_232_471_2).abs() < 1e-14);
    }

    #[test]
    fn taps_have_unit_mass_across_regimes() {
        let h = 0.05;
        for &t in &[1e-9, 1e-5, 1e-3, 2.5e-3, 0.01, 0.5, 2.0] {
            let k = heat_taps(t, h, 100_000);
            assert!((k.sum() - 1.0).abs() < 1e-8, "t={t}: {}", k.sum());
            let g = grad_taps(t, h, 100_000);
            assert!(g.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn time_checks() {
        let g = Grid1d::symmetric(3.0, 0.1).unwrap();
        let s = vec![0.0; g.n];
        assert!(heat_convolve(0.0, &g, &s, false).is_err());
        assert!(matches!(heat_convolve(2.0, &g, &s, true), Err(Error::Truncation(_))));
        assert!(heat_convolve(2.0, &g, &s, false).is_ok());
    }
}
