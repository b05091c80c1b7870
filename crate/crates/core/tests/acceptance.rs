//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout.

#![allow(clippy::excessive_precision)]

use std::process::ExitCode;
use std::time::Instant;

use critdrift::counterexample::{counterexample_field, default_grid, lower_bound_table};
use critdrift::drift::{build_example_drift, BoundedPart, DriftSpec, Profile};
use critdrift::experiment::weighted_gaussian_field;
use critdrift::field::SpaceTimeField;
use critdrift::grid::Grid1d;
use critdrift::heat::compute_constants;
use critdrift::mild::{check_gradient_bound, solve_mild, solver_time_grid, MildOptions};
use critdrift::mollifier::mollification_profile;
use critdrift::sde::{euler_maruyama, krylov_check, SimConfig};
use critdrift::spaces::weighted_norm;
use critdrift::stats::{feller_probe, kde, lr_norm_proxy, mean_and_se, variance_and_se, Bandwidth, Observable};
use critdrift::testfn::TestFunction;
use critdrift::zvonkin::{build_phi, compare_routes, working_interval, SigmaSpec, DEFAULT_RESOLUTION};
use critdrift::ExponentPair;

type Outcome = Result<(bool, String), critdrift::Error>;

const PI: f64 = std::f64::consts::PI;

fn e(t: f64) -> ExponentPair {
    ExponentPair::new(2.0, 4.0, 1, t).unwrap()
}

fn gauss(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn example_drift() -> DriftSpec {
    build_example_drift(Profile::gaussian(0.2, 0.5), &e(0.5)).unwrap()
}

fn with_bump(d: DriftSpec) -> DriftSpec {
    d.with_bounded(BoundedPart::IndicatorBump { a: -0.5, b: 0.5, height: 0.3 })
}

fn counterexample_bound() -> Outcome {
    let start = Instant::now();
    let k_max = 32;
    let f = counterexample_field(&default_grid(k_max)?, k_max)?;
    let rows = lower_bound_table(&f, &[4, 8, 16])?;
    let secs = start.elapsed().as_secs_f64();
    let worst = rows.iter().map(|r| r.sup_gap_sq).fold(f64::INFINITY, f64::min);
    let detail: Vec<String> = rows.iter().map(|r| format!("n={} {:.4}", r.n, r.sup_gap_sq)).collect();
    Ok((worst >= 0.23 && secs < 30.0, format!("{} (>= 0.23), {secs:.1}s", detail.join(", "))))
}

fn mollification_convergence() -> Outcome {
    let start = Instant::now();
    let g = Grid1d::symmetric(8.0, 1.0 / 512.0)?;
    let f = weighted_gaussian_field(&e(1.0), g, 1.0, 0.5)?;
    let prof = mollification_profile(&f, &[4, 16, 64, 256], &e(1.0))?;
    let secs = start.elapsed().as_secs_f64();
    let dec = prof.windows(2).all(|w| w[1].1 < w[0].1);
    let last = prof[3].1;
    let detail: Vec<String> = prof.iter().map(|(n, v)| format!("n={n} {v:.3e}")).collect();
    Ok((dec && last < 1e-2 && secs < 30.0, format!("{}, {secs:.1}s", detail.join(", "))))
}

fn explicit_constant() -> Outcome {
    // 40-digit evaluation of the Gamma/Beta expressions for (p, q, d) = (2, 4, 1)
    let c_grad = 1.668_581_432_959_103_114_879_481_113_058_405_022_979_f64;
    let c_sup = 0.899_953_736_161_125_688_526_348_103_709_618_307_587_7_f64;
    let k = compute_constants(&e(1.0))?;
    let rg = ((k.c_grad - c_grad) / c_grad).abs();
    let rs = ((k.c_sup - c_sup) / c_sup).abs();
    let rc = ((k.c0 - c_grad.max(c_sup)) / c_grad).abs();
    // theta = min(1 - 2/q, ...) at q = 4 evaluates to 0.3
    let theta_ok = k.theta == 0.3;
    Ok((
        rg < 1e-10 && rs < 1e-10 && rc < 1e-10 && theta_ok,
        format!("C_grad rel {rg:.1e}, C_sup rel {rs:.1e}, C0 {:.12}, theta {}", k.c0, k.theta),
    ))
}

fn gradient_bound() -> Outcome {
    let grid = Grid1d::symmetric(12.0, 0.05)?;
    let opts = MildOptions::default();
    let mut all = true;
    let mut parts = Vec::new();
    let example = build_example_drift(Profile::gaussian(1.0, 0.5), &e(0.5))?;
    for name in ["gaussian", "weighted_gaussian", "reversed_example"] {
        let start = Instant::now();
        let horizon = if name == "reversed_example" { 0.5 } else { 1.0 };
        let exps = e(horizon);
        let times = solver_time_grid(horizon, &opts);
        let f = SpaceTimeField::from_fn(times, grid, horizon, |t, x| match name {
            "gaussian" => gauss(x),
            _ if t == 0.0 => 0.0,
            "weighted_gaussian" => t.powf(-0.25) * gauss(x),
            _ => example.b1.eval_reversed(horizon, t, x).abs(),
        })?;
        let sol = solve_mild(&f, None, &exps, &opts)?;
        let k = compute_constants(&exps)?;
        let bound = k.c_grad * weighted_norm(&f, &exps)? * 1.05;
        let secs = start.elapsed().as_secs_f64();
        let ok = sol.sup_grad() <= bound && secs < 120.0;
        // the library's own report must agree
        let rep = check_gradient_bound(&sol, &f, None, 0.05)?;
        all &= ok && rep.grad_pass == ok;
        parts.push(format!("{name} {:.4} <= {:.4} ({secs:.1}s)", sol.sup_grad(), bound));
    }
    Ok((all, parts.join(", ")))
}

fn duhamel_oracle() -> Outcome {
    let grid = Grid1d::symmetric(12.0, 0.05)?;
    let opts = MildOptions::default();
    let times = solver_time_grid(1.0, &opts);
    let f = SpaceTimeField::from_fn(times.clone(), grid, 1.0, |_, x| gauss(x))?;
    let sol = solve_mild(&f, None, &e(1.0), &opts)?;
    // u(1, 0) = int_0^1 N(0, 1 + s)(0) ds
    let want = 2.0 * (2f64.sqrt() - 1.0) / (2.0 * PI).sqrt();
    let got = sol.u.slice(sol.u.n_times() - 1)[grid.n / 2];
    let k = compute_constants(&e(1.0))?;
    let shape = SpaceTimeField::from_fn(times, grid, 1.0, |s, x| {
        if s > 0.0 {
            s.powf(-0.25) * (-(x - 0.5).powi(2)).exp()
        } else {
            0.0
        }
    })?;
    let g = shape.scaled(0.4 / k.c0 / weighted_norm(&shape, &e(1.0))?);
    let s = solve_mild(&f, Some(&g), &e(1.0), &opts)?;
    Ok((
        (got - want).abs() <= 2e-3 && s.contraction_ratio <= 0.45,
        format!(
            "u(1,0) {got:.6} vs {want:.6}; picard ratio {:.4} in {} iterations",
            s.contraction_ratio, s.iterations
        ),
    ))
}

fn krylov_estimate() -> Outcome {
    let start = Instant::now();
    let grid = Grid1d::symmetric(8.0, 1.0 / 512.0)?;
    let indicator = TestFunction::Indicator { a: -1.0, b: 1.0, height: 1.0 };
    // Brownian occupation of [-1, 1], Simpson in u = sqrt(t)
    let m = 4000;
    let h = 1.0 / m as f64;
    let g = |u: f64| if u == 0.0 { 0.0 } else { 2.0 * u * (2.0 * norm_cdf(1.0 / u) - 1.0) };
    let mut acc = g(0.0) + g(1.0);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    let lhs0 = acc * h / 3.0;
    let k1 = compute_constants(&e(1.0))?;
    let rhs0 = k1.c0 * 2f64.sqrt();
    let mut ok = lhs0 <= rhs0;
    let mut parts = vec![format!("indicator/zero {lhs0:.4} <= {rhs0:.4}")];

    let d = with_bump(example_drift());
    let k = compute_constants(&e(0.5))?;
    let cfg = SimConfig::new(0.0, 100_000, 1024, 606);
    let ens = euler_maruyama(&d, 0.5, &cfg)?;
    let magnitude = TestFunction::DriftMagnitude { drift: example_drift() };
    for (name, f) in [("|b1|/example+bump", magnitude), ("indicator/example+bump", indicator)] {
        let r = krylov_check(&f, &d, &ens, &k, &grid)?;
        // rhs recomputed from its parts
        let rhs = k.c0 * (1.0 + r.xi_integral) * r.reversed_norm;
        let pass = r.lhs <= rhs + 2.0 * r.lhs_se;
        ok &= pass && pass == r.pass;
        parts.push(format!("{name} {:.4} (se {:.1e}) <= {rhs:.4}", r.lhs, r.lhs_se));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < 300.0, format!("{}, {secs:.1}s", parts.join(", "))))
}

fn brownian_ou() -> Outcome {
    let n = 1024;
    let b = euler_maruyama(&DriftSpec::zero(), 1.0, &SimConfig::new(0.0, 100_000, n, 7))?.terminal();
    let (m, mse) = mean_and_se(&b);
    let (v, vse) = variance_and_se(&b);
    let b_ok = m.abs() <= 3.0 * mse && (v - 1.0).abs() <= 3.0 * vse;
    let ou = DriftSpec::zero().with_bounded(BoundedPart::Linear { rate: 1.0 });
    let x = euler_maruyama(&ou, 1.0, &SimConfig::new(1.0, 100_000, n, 8))?.terminal();
    let (om, omse) = mean_and_se(&x);
    let (ov, ovse) = variance_and_se(&x);
    let dt = 1.0 / n as f64;
    let (em, ev) = ((-1.0f64).exp(), (1.0 - (-2.0f64).exp()) / 2.0);
    let bias_m = ((1.0 - dt).powi(n as i32) - em).abs();
    let bias_v = (dt * (1.0 - (1.0 - dt).powi(2 * n as i32)) / (1.0 - (1.0 - dt).powi(2)) - ev).abs();
    let o_ok = (om - em).abs() <= 3.0 * omse + bias_m && (ov - ev).abs() <= 3.0 * ovse + bias_v;
    Ok((
        b_ok && o_ok,
        format!("W: mean {m:.4} var {v:.4}; OU: mean {om:.4} (exact {em:.4}) var {ov:.4} (exact {ev:.4})"),
    ))
}

fn zvonkin_routes() -> Outcome {
    let s = SigmaSpec::tanh_default();
    let d = DriftSpec::zero().with_bounded(BoundedPart::IndicatorBump { a: -0.5, b: 0.5, height: 0.5 });
    let map = build_phi(&s, working_interval(0.0, 1.0, 3.0, d.bound_b2()), DEFAULT_RESOLUTION)?;
    let rt = map.roundtrip_error();
    let bl = map.bilipschitz();
    let mut ok = rt <= 1e-6 && bl.holds;
    let mut parts = vec![format!("roundtrip {rt:.1e}, slopes [{:.6}, {:.6}]", bl.min_slope, bl.max_slope)];
    for (i, n) in [256usize, 1024].into_iter().enumerate() {
        let r = compare_routes(&d, &s, &map, 1.0, &SimConfig::new(0.0, 20_000, n, 900 + i as u64), 3)?;
        ok &= r.ks_routes <= 1.5 * r.noise_floor;
        parts.push(format!("n={n} KS {:.4} vs floor {:.4}", r.ks_routes, r.noise_floor));
    }
    Ok((ok, parts.join(", ")))
}

fn strong_feller() -> Outcome {
    let d = example_drift();
    let f = Observable::HalfLine { a: 0.0 };
    let mut gaps = Vec::new();
    for h in [0.2f64, 0.1, 0.05] {
        let k = (0.4 / h).round() as usize;
        let xs: Vec<f64> = (0..=k).map(|j| -0.2 + j as f64 * h).collect();
        let sim = |x: f64| Ok(euler_maruyama(&d, 0.5, &SimConfig::new(x, 20_000, 256, 4242))?.terminal());
        let p = feller_probe(&f, &xs, sim)?;
        gaps.push((p.max_gap, p.max_gap_se));
    }
    let dec = gaps.windows(2).all(|w| w[1].0 <= w[0].0 + 2.0 * w[0].1.max(w[1].1));
    let sim = |x: f64| Ok(euler_maruyama(&DriftSpec::zero(), 1.0, &SimConfig::new(x, 20_000, 64, 4343))?.terminal());
    let p = feller_probe(&f, &[0.0], sim)?;
    let half = (p.rows[0].estimate - 0.5).abs() <= 3.0 * p.rows[0].stderr;
    let g: Vec<String> = gaps.iter().map(|(g, s)| format!("{g:.4}±{s:.4}")).collect();
    Ok((dec && half, format!("gaps {}; P_1 f(0) = {:.4}", g.join(" > "), p.rows[0].estimate)))
}

fn density_integrability() -> Outcome {
    let b = euler_maruyama(&DriftSpec::zero(), 1.0, &SimConfig::new(0.0, 100_000, 64, 55))?.terminal();
    let kb = kde(&b, Bandwidth::Silverman)?;
    let x = euler_maruyama(&example_drift(), 0.5, &SimConfig::new(0.0, 100_000, 256, 56))?.terminal();
    let kx = kde(&x, Bandwidth::Silverman)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [1.0, 2.0, 3.0] {
        // int N(0,1)^r dy = (2 pi)^{-(r-1)/2} r^{-1/2}
        let closed = (2.0 * PI).powf(-(r - 1.0) / 2.0) / f64::sqrt(r);
        let pb = lr_norm_proxy(&kb, r)?;
        let px = lr_norm_proxy(&kx, r)?;
        ok &= (pb.value / closed - 1.0).abs() <= 0.05 && px.stable;
        parts.push(format!("r={r}: {:.4}/{closed:.4}, example change {:.1e}", pb.value, px.relative_change));
    }
    Ok((ok, parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("counterexample lower bound", counterexample_bound),
        ("mollification convergence", mollification_convergence),
        ("explicit constant", explicit_constant),
        ("gradient bound", gradient_bound),
        ("duhamel oracle and picard contraction", duhamel_oracle),
        ("krylov estimate", krylov_estimate),
        ("brownian and OU oracles", brownian_ou),
        ("zvonkin route equivalence", zvonkin_routes),
        ("strong feller probe", strong_feller),
        ("density integrability proxy", density_integrability),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} criterion {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
