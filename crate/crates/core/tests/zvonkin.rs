use critdrift::drift::{build_example_drift, BoundedPart, Drift, DriftSpec, Profile};
use critdrift::heat::compute_constants;
use critdrift::sde::SimConfig;
use critdrift::stats::{mean_and_se, variance_and_se};
use critdrift::zvonkin::{
    build_phi, compare_routes, simulate_both_routes, transformed_drift, transformed_singular_norm,
    working_interval, SigmaSpec, DEFAULT_RESOLUTION,
};
use critdrift::ExponentPair;

fn phi_exact(x: f64) -> f64 {
    x - ((3.0 * (2.0 * x).exp() + 1.0) / 4.0).ln() / 3.0
}

fn bump() -> DriftSpec {
    DriftSpec::zero().with_bounded(BoundedPart::IndicatorBump { a: -0.5, b: 0.5, height: 0.5 })
}

#[test]
fn constant_sigma_maps() {
    for c in [1.0, 2.0] {
        let m = build_phi(&SigmaSpec::Constant { c }, (-5.0, 5.0), 1000).unwrap();
        for x in [-4.3, -1.0, 0.0, 0.7, 3.9] {
            assert!((m.phi(x) - x / c).abs() < 1e-12);
            assert!((m.psi(x / c) - x).abs() < 1e-12);
        }
    }
}

#[test]
fn tanh_sigma_map() {
    let s = SigmaSpec::tanh_default();
    let m = build_phi(&s, (-8.0, 8.0), DEFAULT_RESOLUTION).unwrap();
    let h = 1e-5;
    for k in 0..=140 {
        let x = -7.0 + 0.1 * k as f64;
        let d = (m.phi(x + h) - m.phi(x - h)) / (2.0 * h);
        assert!((d * s.eval(x) - 1.0).abs() < 1e-8, "x {x}: {}", d * s.eval(x));
        assert!((m.phi(x) - phi_exact(x)).abs() < 1e-8);
    }
    assert!(m.roundtrip_error() <= 1e-6);
    let bl = m.bilipschitz();
    assert!(bl.holds, "{bl:?}");
    assert_eq!((bl.lower, bl.upper), (1.0 / 3.0, 1.0));
    // brute force on a subsample of pairs
    let xs: Vec<f64> = (0..200).map(|k| -7.9 + 0.079 * k as f64).collect();
    for &x in &xs {
        for &y in &xs {
            if x != y {
                let r = (m.phi(x) - m.phi(y)).abs() / (x - y).abs();
                assert!((1.0 / 3.0 - 1e-9..=1.0 + 1e-9).contains(&r));
                let (u, v) = (m.phi(x), m.phi(y));
                let r = (m.psi(u) - m.psi(v)).abs() / (u - v).abs();
                assert!((1.0 - 1e-6..=3.0 + 1e-6).contains(&r));
            }
        }
    }
}

#[test]
fn transformed_drift_values() {
    let s = SigmaSpec::tanh_default();
    let m = build_phi(&s, (-8.0, 8.0), DEFAULT_RESOLUTION).unwrap();
    let zero = DriftSpec::zero();
    let td = transformed_drift(&zero, &s, &m).unwrap();
    // -sigma'(0)/2 with sigma' = sech^2
    assert!((td.eval(0.3, m.phi(0.0)) + 0.5).abs() < 1e-9);

    let b = bump();
    let td = transformed_drift(&b, &s, &m).unwrap();
    for x in [-2.0f64, -0.4, 0.1, 0.45, 1.3] {
        let sech2 = 1.0 / x.cosh().powi(2);
        let want = b.eval(0.0, x) / s.eval(x) - 0.5 * sech2;
        assert!((td.eval(0.0, m.phi(x)) - want).abs() < 1e-6);
    }

    let c = SigmaSpec::Constant { c: 2.0 };
    let mc = build_phi(&c, (-8.0, 8.0), 4096).unwrap();
    let td = transformed_drift(&b, &c, &mc).unwrap();
    for y in [-0.3, 0.0, 0.2, 1.0] {
        assert_eq!(td.eval(0.0, y), b.eval(0.0, 2.0 * y) / 2.0);
    }
    let one = SigmaSpec::Constant { c: 1.0 };
    let m1 = build_phi(&one, (-8.0, 8.0), 4096).unwrap();
    let td = transformed_drift(&b, &one, &m1).unwrap();
    for y in [-0.6, -0.1, 0.3, 0.55] {
        assert_eq!(td.eval(0.0, y), b.eval(0.0, y));
    }
}

#[test]
fn transformed_singular_norm_reported() {
    let e = ExponentPair::new(2.0, 4.0, 1, 0.5).unwrap();
    let k = compute_constants(&e).unwrap();
    let b = build_example_drift(Profile::gaussian(0.05, 0.5), &e).unwrap();
    let s = SigmaSpec::tanh_default();
    let m = build_phi(&s, (-8.0, 8.0), 4096).unwrap();
    let td = transformed_drift(&b, &s, &m).unwrap();
    let r = transformed_singular_norm(&td, &e, &k, 4001).unwrap();
    let g = critdrift::grid::Grid1d::symmetric(8.0, 0.004).unwrap();
    let raw = b.reversed_weighted_norm(&g, &e).unwrap();
    // dividing by sigma and changing variables stays within the delta bounds
    assert!(r.singular_norm <= raw * 3f64.sqrt() && r.singular_norm >= raw / 3.0);
    assert_eq!(r.below_threshold, r.total < 0.5 / k.c0);
}

#[test]
fn routes_for_constant_sigma() {
    for c in [1.0, 2.0] {
        let s = SigmaSpec::Constant { c };
        let m = build_phi(&s, working_interval(0.0, 1.0, c, 0.0), 4096).unwrap();
        let cfg = SimConfig::new(0.0, 20_000, 128, 12);
        let (a, b) = simulate_both_routes(&DriftSpec::zero(), &s, &m, 1.0, &cfg).unwrap();
        for e in [a, b] {
            let x = e.terminal();
            let (mu, se) = mean_and_se(&x);
            let (v, vse) = variance_and_se(&x);
            assert!(mu.abs() <= 3.0 * se);
            assert!((v - c * c).abs() <= 3.0 * vse, "c {c}: var {v} se {vse}");
        }
    }
}

#[test]
fn tanh_routes_agree() {
    let s = SigmaSpec::tanh_default();
    let b = bump();
    let m = build_phi(&s, working_interval(0.0, 1.0, 3.0, b.bound_b2()), DEFAULT_RESOLUTION).unwrap();
    let r = compare_routes(&b, &s, &m, 1.0, &SimConfig::new(0.0, 20_000, 256, 2024), 3).unwrap();
    println!("{r:?}");
    assert!(r.pass);
}
