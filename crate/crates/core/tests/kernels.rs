use std::f64::consts::PI;

use critdrift::convolution::{convolve_direct, convolve_fft, CenteredKernel};
use critdrift::counterexample::{counterexample_field, default_grid, lower_bound_table};
use critdrift::field::{log_times, SpaceTimeField};
use critdrift::heat::{grad_heat_convolve, grad_kernel_lr_norm, heat_convolve, kernel_lr_norm};
use critdrift::mollifier::{mollify_slice, MollifierSpec};
use critdrift::spaces::{classify_space, reverse_time, weighted_norm, DEFAULT_C0Q_TOL};
use critdrift::{ExponentPair, Grid1d};

fn normal(var: f64, x: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[test]
fn heat_semigroup_on_gaussians() {
    let g = Grid1d::symmetric(12.0, 1.0 / 32.0).unwrap();
    let h = g.sample(|x| normal(0.5, x));
    let (t, v) = (0.3, 0.8);
    let u = heat_convolve(t, &g, &h, true).unwrap();
    let du = grad_heat_convolve(t, &g, &h, true).unwrap();
    for j in (0..g.n).step_by(37) {
        let x = g.x(j);
        assert!((u[j] - normal(v, x)).abs() < 1e-6, "{x}");
        assert!((du[j] + x / v * normal(v, x)).abs() < 1e-5, "{x}");
    }
}

#[test]
fn kernel_norms_match_quadrature() {
    let t = 0.7;
    let n = 200_000;
    let h = 40.0 / n as f64;
    for r in [1.0, 1.5, 2.0, 4.0] {
        let (mut k, mut dk) = (0.0, 0.0);
        for j in 0..n {
            let x = -20.0 + (j as f64 + 0.5) * h;
            k += normal(t, x).powf(r) * h;
            dk += (x / t * normal(t, x)).abs().powf(r) * h;
        }
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        assert!(rel(kernel_lr_norm(t, r, 1), k.powf(1.0 / r)) < 1e-8, "r={r}");
        assert!(rel(grad_kernel_lr_norm(t, r), dk.powf(1.0 / r)) < 1e-7, "r={r}");
    }
}

#[test]
fn fft_and_direct_agree() {
    let signal: Vec<f64> = (0..3000).map(|j| ((j * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let kernel = CenteredKernel::from_fn(150, |m| (-(m as f64).powi(2) / 900.0).exp());
    let a = convolve_direct(&signal, &kernel);
    let b = convolve_fft(&signal, &kernel);
    assert_eq!(a.len(), b.len());
    let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn mollifier_preserves_mass_and_constants() {
    let g = Grid1d::symmetric(4.0, 1.0 / 256.0).unwrap();
    for n in [2, 8, 32] {
        let k = MollifierSpec::new(n).kernel(g.h).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-14);
        let s = mollify_slice(&g, &vec![2.5; g.n], &MollifierSpec::new(n)).unwrap();
        // away from the edges the constant is reproduced
        assert!((s[g.n / 2] - 2.5).abs() < 1e-12);
    }
    assert!(MollifierSpec::new(0).kernel(g.h).is_err());
}

#[test]
fn weighted_norm_and_membership() {
    let e = ExponentPair::new(2.0, 4.0, 1, 1.0).unwrap();
    let g = Grid1d::symmetric(10.0, 1.0 / 64.0).unwrap();
    let times = log_times(1e-16, 1.0, 4);
    // ||N(0,1)||_2 = (4 pi)^{-1/4}
    let l2 = (4.0 * PI).powf(-0.25);
    let critical = SpaceTimeField::from_fn(times.clone(), g, 1.0, |t, x| t.powf(-0.25) * normal(1.0, x)).unwrap();
    assert!((weighted_norm(&critical, &e).unwrap() / l2 - 1.0).abs() < 1e-6);
    let m = classify_space(&critical, &e, DEFAULT_C0Q_TOL).unwrap();
    assert!(!m.in_c0q);
    let tame = SpaceTimeField::from_fn(times, g, 1.0, |_, x| normal(1.0, x)).unwrap();
    let m = classify_space(&tame, &e, DEFAULT_C0Q_TOL).unwrap();
    assert!(m.in_c0q && (m.linf_q_norm / l2 - 1.0).abs() < 1e-6);
}

#[test]
fn reversal_is_an_involution() {
    let g = Grid1d::symmetric(2.0, 0.25).unwrap();
    let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let f = SpaceTimeField::from_fn(times, g, 1.0, |t, x| t * t + x).unwrap();
    let r = reverse_time(&f).unwrap();
    assert!((r.slice(1)[3] - (0.75f64.powi(2) + g.x(3))).abs() < 1e-15);
    assert_eq!(reverse_time(&r).unwrap().values(), f.values());
}

#[test]
fn counterexample_gap_stays_large() {
    let k_max = 16;
    let f = counterexample_field(&default_grid(k_max).unwrap(), k_max).unwrap();
    let rows = lower_bound_table(&f, &[2, 4, 8]).unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r.sup_gap_sq >= 0.23 && r.sup_gap_sq <= 1.0 + 1e-9, "{r:?}");
        assert!(r.k_star >= 1 && r.k_star <= k_max);
    }
}
