use critdrift::drift::{build_example_drift, BoundedPart, DriftSpec, Profile};
use critdrift::error::Error;
use critdrift::grid::Grid1d;
use critdrift::heat::compute_constants;
use critdrift::sde::{euler_maruyama, increment_modulus, krylov_check, PathEnsemble, SimConfig};
use critdrift::stats::{mean_and_se, variance_and_se};
use critdrift::testfn::TestFunction;
use critdrift::ExponentPair;

fn exps(t: f64) -> ExponentPair {
    ExponentPair::new(2.0, 4.0, 1, t).unwrap()
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[test]
fn brownian_terminal_moments() {
    let cfg = SimConfig::new(0.0, 20_000, 256, 11);
    let e = euler_maruyama(&DriftSpec::zero(), 1.0, &cfg).unwrap();
    let x = e.terminal();
    let (m, se) = mean_and_se(&x);
    let (v, vse) = variance_and_se(&x);
    assert!(m.abs() <= 3.0 * se, "mean {m} se {se}");
    assert!((v - 1.0).abs() <= 3.0 * vse, "var {v} se {vse}");
    assert!(e.states.iter().all(|v| v.is_finite()));
    assert!(e.marginal(0).iter().all(|&v| v == 0.0));
}

#[test]
fn ornstein_uhlenbeck_moments() {
    let d = DriftSpec::zero().with_bounded(BoundedPart::Linear { rate: 1.0 });
    let cfg = SimConfig::new(1.0, 20_000, 1024, 5);
    let x = euler_maruyama(&d, 1.0, &cfg).unwrap().terminal();
    let (m, se) = mean_and_se(&x);
    let (v, vse) = variance_and_se(&x);
    // Euler for OU: mean (1-dt)^n, variance sum (1-dt)^{2k} dt
    let dt: f64 = 1.0 / 1024.0;
    let m_exact = (-1.0f64).exp();
    let v_exact = (1.0 - (-2.0f64).exp()) / 2.0;
    let m_em = (1.0 - dt).powi(1024);
    let v_em = dt * (1.0 - (1.0 - dt).powi(2048)) / (1.0 - (1.0 - dt).powi(2));
    assert!((m - m_exact).abs() <= 3.0 * se + (m_em - m_exact).abs());
    assert!((v - v_exact).abs() <= 3.0 * vse + (v_em - v_exact).abs());
}

#[test]
fn constant_drift_shifts_mean() {
    let d = DriftSpec::zero().with_bounded(BoundedPart::Constant { c: 0.5 });
    let x = euler_maruyama(&d, 1.0, &SimConfig::new(0.0, 20_000, 64, 9)).unwrap().terminal();
    let (m, se) = mean_and_se(&x);
    assert!((m - 0.5).abs() <= 3.0 * se);
}

#[test]
fn deterministic_across_worker_counts() {
    let d = build_example_drift(Profile::gaussian(0.05, 0.5), &exps(0.5))
        .unwrap()
        .with_bounded(BoundedPart::IndicatorBump { a: -0.5, b: 0.5, height: 0.3 });
    let mut cfg = SimConfig::new(0.1, 500, 128, 77);
    let mut runs = Vec::new();
    for w in [None, Some(1), Some(3)] {
        cfg.workers = w;
        runs.push(euler_maruyama(&d, 0.5, &cfg).unwrap());
    }
    for r in &runs[1..] {
        assert_eq!(r, &runs[0]);
    }
    cfg.seed = 78;
    assert_ne!(euler_maruyama(&d, 0.5, &cfg).unwrap().states, runs[0].states);
}

#[test]
fn increments_uncorrelated() {
    let n_steps = 256;
    let n_paths = 2000;
    let mut cfg = SimConfig::new(0.0, n_paths, n_steps, 3);
    cfg.record_points = n_steps;
    let e = euler_maruyama(&DriftSpec::zero(), 1.0, &cfg).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for p in 0..n_paths {
        let dx: Vec<f64> = e.path(p).windows(2).map(|w| w[1] - w[0]).collect();
        for w in dx.windows(2) {
            num += w[0] * w[1];
        }
        den += dx.iter().map(|v| v * v).sum::<f64>();
    }
    let rho = num / den;
    assert!(rho.abs() <= 3.0 / ((n_paths * n_steps) as f64).sqrt(), "lag-1 corr {rho}");
}

#[test]
fn ensemble_persistence_roundtrip() {
    let d = build_example_drift(Profile::gaussian(0.05, 0.5), &exps(0.5)).unwrap();
    let e = euler_maruyama(&d, 0.5, &SimConfig::new(0.0, 250, 64, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = e.write(dir.path(), "ens", 100).unwrap();
    assert_eq!(files.len(), 4);
    let back = PathEnsemble::read(&files[0]).unwrap();
    assert_eq!(back, e);
}

#[test]
fn exclusion_reporting() {
    // a drift that is undefined far out flags the few paths that get there
    let d = |_: f64, x: f64| if x > 2.0 { f64::NAN } else { 0.0 };
    let e = euler_maruyama(&d, 1.0, &SimConfig::new(0.0, 20_000, 64, 4));
    match e {
        Err(Error::ExcessiveExclusion { excluded, total }) => {
            assert!(excluded > 200 && total == 20_000)
        }
        other => panic!("expected an exclusion error, got {:?}", other.map(|e| e.excluded_count())),
    }
    let d = |_: f64, x: f64| if x > 3.0 { f64::NAN } else { 0.0 };
    let e = euler_maruyama(&d, 1.0, &SimConfig::new(0.0, 20_000, 64, 4)).unwrap();
    assert!(e.excluded_count() > 0 && e.excluded_count() < 200);
    assert!(e.states.iter().all(|v| v.is_finite()));
    assert_eq!(e.terminal().len(), 20_000 - e.excluded_count());
    assert!(euler_maruyama(&DriftSpec::zero(), 1.0, &SimConfig::new(0.0, 10, 8, 1)).is_err());
}

#[test]
fn singular_drift_is_path_integrable() {
    let d = build_example_drift(Profile::gaussian(0.05, 0.5), &exps(0.5)).unwrap();
    let e = euler_maruyama(&d, 0.5, &SimConfig::new(0.0, 5000, 256, 8)).unwrap();
    assert!(e.dt_policy.clamp);
    assert!(e.integrable_fraction() >= 0.99);
    assert!(*e.times.last().unwrap() == 0.5);
}

#[test]
fn krylov_indicator_brownian() {
    // lhs = int_0^1 P(|W_t| <= 1) dt by Simpson in u = sqrt(t)
    let m = 2000;
    let h = 1.0 / m as f64;
    let g = |u: f64| if u == 0.0 { 0.0 } else { 2.0 * u * (2.0 * norm_cdf(1.0 / u) - 1.0) };
    let mut acc = g(0.0) + g(1.0);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    let oracle = acc * h / 3.0;
    assert!((oracle - 0.849320433312458).abs() < 1e-10);

    let k = compute_constants(&exps(1.0)).unwrap();
    let f = TestFunction::Indicator { a: -1.0, b: 1.0, height: 1.0 };
    let grid = Grid1d::symmetric(4.0, 1.0 / 512.0).unwrap();
    let e = euler_maruyama(&DriftSpec::zero(), 1.0, &SimConfig::new(0.0, 20_000, 256, 21)).unwrap();
    let rep = krylov_check(&f, &DriftSpec::zero(), &e, &k, &grid).unwrap();
    assert!((rep.reversed_norm - 2f64.sqrt()).abs() < 5e-3);
    assert!((rep.rhs - k.c0 * rep.reversed_norm).abs() < 1e-15);
    assert!(rep.pass && oracle <= rep.rhs);
    // left-point sums on the recorded grid carry an O(dt) bias
    assert!((rep.lhs - oracle).abs() <= 3.0 * rep.lhs_se + 0.01, "{rep:?}");

    let z = krylov_check(&TestFunction::Zero, &DriftSpec::zero(), &e, &k, &grid).unwrap();
    assert!(z.lhs == 0.0 && z.rhs == 0.0 && z.pass);
}

#[test]
fn brownian_modulus_slope() {
    let e = euler_maruyama(&DriftSpec::zero(), 1.0, &SimConfig::new(0.0, 10_000, 512, 2)).unwrap();
    let r = increment_modulus(&e, &[1, 2, 4, 8, 16], 1.0).unwrap();
    assert!((r.slope - 0.5).abs() <= 0.05, "{r:?}");
    // E|W_gap| = sqrt(2 gap / pi)
    for &(gap, m, se) in &r.points {
        assert!((m - (2.0 * gap / std::f64::consts::PI).sqrt()).abs() <= 4.0 * se);
    }
    assert!(increment_modulus(&e, &[1, 2], 1.0).is_err());
}

#[test]
fn constant_drift_modulus_slope() {
    let d = DriftSpec::zero().with_bounded(BoundedPart::Constant { c: 1.0 });
    let e = euler_maruyama(&d, 1.0, &SimConfig::new(0.0, 10_000, 512, 2)).unwrap();
    let r = increment_modulus(&e, &[1, 2, 4], 1.0).unwrap();
    // E|c g + W_g| for N(g, g)
    let mabs = |g: f64| {
        let s = g.sqrt();
        s * (2.0 / std::f64::consts::PI).sqrt() * (-g / 2.0).exp() + g * (1.0 - 2.0 * norm_cdf(-g / s))
    };
    let pts: Vec<(f64, f64)> = r.points.iter().map(|&(g, _, _)| (g, mabs(g))).collect();
    let oracle = critdrift::mild::log_log_slope(&pts).unwrap();
    assert!((r.slope - oracle).abs() <= 0.05, "{} vs {oracle}", r.slope);
    assert!((r.slope - 0.5).abs() <= 0.05);
}
