//! Config-driven experiments. Each run writes its tables and reports into
//! one output directory together with a manifest of hashed files and checks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counterexample::{counterexample_field, default_grid, lower_bound_table};
use crate::drift::{build_example_drift, BoundedPart, DriftSpec, Profile, SingularPart};
use crate::error::{Error, Result};
use crate::exponents::ExponentPair;
use crate::field::{log_times, SpaceTimeField};
use crate::grid::Grid1d;
use crate::heat::{compute_constants, holder_theta};
use crate::manifest::{Manifest, ManifestBuilder, PlotHint};
use crate::mild::{check_gradient_bound, solve_mild, solver_time_grid, time_holder_check, MildOptions};
use crate::mollifier::mollification_profile;
use crate::rng::derive_seed;
use crate::sde::{brownian_occupation, euler_maruyama, increment_modulus, krylov_check, SimConfig};
use crate::spaces::weighted_norm;
use crate::stats::{feller_probe, kde, lr_norm_proxy, mean_and_se, variance_and_se, Bandwidth, Observable};
use crate::testfn::TestFunction;
use crate::zvonkin::{build_phi, compare_routes, working_interval, SigmaSpec, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PdeSolve,
    KrylovCheck,
    Simulate,
    ZvonkinCompare,
    MollifyDemo,
    Counterexample,
    FellerProbe,
    Density,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::PdeSolve => "pde-solve",
            ExperimentKind::KrylovCheck => "krylov-check",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::ZvonkinCompare => "zvonkin-compare",
            ExperimentKind::MollifyDemo => "mollify-demo",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::FellerProbe => "feller-probe",
            ExperimentKind::Density => "density",
        }
    }
}

fn default_exponents() -> ExponentPair {
    ExponentPair {
        p: 2.0,
        q: 4.0,
        d: 1,
        horizon: 1.0,
    }
}

/// One JSON document per run. Only the section of the selected experiment
/// is read; the others must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// `(p, q, d)`; the horizon here is the default for cases without one.
    #[serde(default = "default_exponents")]
    pub exponents: ExponentPair,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde_solve: Option<PdeSolveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov_check: Option<KrylovParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zvonkin_compare: Option<ZvonkinParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify_demo: Option<MollifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feller_probe: Option<FellerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityParams>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            exponents: default_exponents(),
            seed: 0,
            workers: None,
            strict: false,
            out: None,
            pde_solve: None,
            krylov_check: None,
            simulate: None,
            zvonkin_compare: None,
            mollify_demo: None,
            counterexample: None,
            feller_probe: None,
            density: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.exponents.validate().map_err(|e| Error::Config(e.to_string()))?;
        let present = [
            (ExperimentKind::PdeSolve, self.pde_solve.is_some()),
            (ExperimentKind::KrylovCheck, self.krylov_check.is_some()),
            (ExperimentKind::Simulate, self.simulate.is_some()),
            (ExperimentKind::ZvonkinCompare, self.zvonkin_compare.is_some()),
            (ExperimentKind::MollifyDemo, self.mollify_demo.is_some()),
            (ExperimentKind::Counterexample, self.counterexample.is_some()),
            (ExperimentKind::FellerProbe, self.feller_probe.is_some()),
            (ExperimentKind::Density, self.density.is_some()),
        ];
        for (k, p) in present {
            if p && k != self.experiment {
                return cfg(format!(
                    "section for {} given but experiment is {}",
                    k.name(),
                    self.experiment.name()
                ));
            }
        }
        if self.workers == Some(0) {
            return cfg("workers must be at least 1".into());
        }
        let n_paths_ok = |n: usize| (1..=10_000_000).contains(&n);
        let n_steps_ok = |n: usize| (16..=1 << 20).contains(&n);
        match self.experiment {
            ExperimentKind::KrylovCheck => {
                let p = self.krylov_check.clone().unwrap_or_default();
                if !n_paths_ok(p.n_paths) || !n_steps_ok(p.n_steps) {
                    return cfg("n_paths must be in [1, 1e7] and n_steps in [16, 2^20]".into());
                }
            }
            ExperimentKind::Simulate => {
                let p = self.simulate.clone().unwrap_or_default();
                if !n_paths_ok(p.n_paths) || !n_steps_ok(p.n_steps) {
                    return cfg("n_paths must be in [1, 1e7] and n_steps in [16, 2^20]".into());
                }
            }
            ExperimentKind::ZvonkinCompare => {
                let p = self.zvonkin_compare.clone().unwrap_or_default();
                if !n_paths_ok(p.n_paths) || p.n_steps_list.iter().any(|&n| !n_steps_ok(n)) {
                    return cfg("n_paths must be in [1, 1e7] and n_steps in [16, 2^20]".into());
                }
            }
            ExperimentKind::Counterexample => {
                let p = self.counterexample.clone().unwrap_or_default();
                if !(1..=256).contains(&p.k_max) || p.n_list.is_empty() {
                    return cfg("k_max must be in [1, 256] and n_list nonempty".into());
                }
            }
            ExperimentKind::MollifyDemo => {
                let p = self.mollify_demo.clone().unwrap_or_default();
                if p.n_list.len() < 2 || !(p.h > 0.0) {
                    return cfg("mollify-demo needs at least two scales and h > 0".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// The logarithmic example drift with a Gaussian base profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleDrift {
    pub amplitude: f64,
    pub width: f64,
    pub horizon: f64,
    /// Height of a bounded bump on `[-0.5, 0.5]` added as `b2`.
    #[serde(default)]
    pub bump: f64,
}

impl Default for ExampleDrift {
    fn default() -> Self {
        Self {
            amplitude: 0.2,
            width: 0.5,
            horizon: 0.5,
            bump: 0.0,
        }
    }
}

impl ExampleDrift {
    fn exps(&self, base: &ExponentPair) -> ExponentPair {
        base.with_horizon(self.horizon)
    }

    pub fn build(&self, base: &ExponentPair) -> Result<DriftSpec> {
        let d = build_example_drift(Profile::gaussian(self.amplitude, self.width), &self.exps(base))?;
        Ok(if self.bump != 0.0 {
            d.with_bounded(BoundedPart::IndicatorBump {
                a: -0.5,
                b: 0.5,
                height: self.bump,
            })
        } else {
            d
        })
    }
}

fn norm_grid() -> Grid1d {
    Grid1d::symmetric(8.0, 1.0 / 512.0).expect("static grid")
}

// ---------------------------------------------------------------- pde-solve

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    /// Standard normal density, constant in time.
    Gaussian,
    /// `t^{-1/q}` times the standard normal density.
    WeightedGaussian,
    /// `|b(T - t, x)|` for the example drift.
    ReversedExample { drift: ExampleDrift },
}

impl Forcing {
    fn name(&self) -> &'static str {
        match self {
            Forcing::Gaussian => "gaussian",
            Forcing::WeightedGaussian => "weighted_gaussian",
            Forcing::ReversedExample { .. } => "reversed_example",
        }
    }

    fn horizon(&self, base: f64) -> f64 {
        match self {
            Forcing::ReversedExample { drift } => drift.horizon,
            _ => base,
        }
    }

    fn field(&self, exps: &ExponentPair, times: Vec<f64>, grid: Grid1d) -> Result<SpaceTimeField> {
        let gauss = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let q = exps.q;
        let t_end = exps.horizon;
        match self {
            Forcing::Gaussian => SpaceTimeField::from_fn(times, grid, t_end, |_, x| gauss(x)),
            Forcing::WeightedGaussian => SpaceTimeField::from_fn(times, grid, t_end, |t, x| {
                if t > 0.0 {
                    t.powf(-1.0 / q) * gauss(x)
                } else {
                    0.0
                }
            }),
            Forcing::ReversedExample { drift } => {
                let d = drift.build(exps)?;
                SpaceTimeField::from_fn(times, grid, t_end, |t, x| {
                    if t > 0.0 {
                        d.b1.eval_reversed(t_end, t, x).abs()
                    } else {
                        0.0
                    }
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSolveParams {
    pub forcings: Vec<Forcing>,
    pub radius: f64,
    pub h: f64,
    pub slack: f64,
    /// Transport `g` scaled to this multiple of `1/C0`; absent means none.
    pub transport_fraction: Option<f64>,
    pub max_ratio: f64,
    pub duhamel_tol: f64,
    pub options: MildOptions,
}

impl Default for PdeSolveParams {
    fn default() -> Self {
        Self {
            forcings: vec![
                Forcing::Gaussian,
                Forcing::WeightedGaussian,
                Forcing::ReversedExample {
                    drift: ExampleDrift {
                        amplitude: 1.0,
                        ..ExampleDrift::default()
                    },
                },
            ],
            radius: 12.0,
            h: 0.05,
            slack: 0.05,
            transport_fraction: Some(0.4),
            max_ratio: 0.45,
            duhamel_tol: 2e-3,
            options: MildOptions::default(),
        }
    }
}

fn run_pde(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.pde_solve.clone().unwrap_or_default();
    let base = cfg.exponents;
    let k = compute_constants(&base)?;
    m.json("constants.json", &k)?;
    let theta = holder_theta(base.q);
    m.check("theta_formula", (k.theta - theta).abs() == 0.0, k.theta, theta);
    m.check("c0_is_max", k.c0 == k.c_grad.max(k.c_sup), k.c0, k.c_grad.max(k.c_sup));

    let grid = Grid1d::symmetric(p.radius, p.h)?;
    let mut rows = Vec::new();
    for (i, forcing) in p.forcings.iter().enumerate() {
        let exps = base.with_horizon(forcing.horizon(base.horizon));
        let times = solver_time_grid(exps.horizon, &p.options);
        let f = forcing.field(&exps, times, grid)?;
        let sol = solve_mild(&f, None, &exps, &p.options)?;
        let rep = check_gradient_bound(&sol, &f, None, p.slack)?;
        let name = forcing.name();
        m.check(format!("gradient_bound_{name}"), rep.grad_pass, rep.sup_grad, rep.grad_rhs * (1.0 + p.slack));
        m.check(format!("solution_bound_{name}"), rep.pass, rep.lhs, rep.rhs * (1.0 + p.slack));
        let hold = time_holder_check(&sol, &exps);
        if let Some(s) = hold.slope {
            m.advisory(format!("time_holder_{name}"), hold.pass, s, hold.threshold);
        }
        rows.push(vec![i as f64, rep.f_norm, rep.sup_u, rep.sup_grad, rep.grad_rhs, rep.rhs]);
        m.json(&format!("gradient_bound_{name}.json"), &rep)?;
        let files = sol.write(&m.dir, &format!("solution_{name}"))?;
        m.add_files(&files, "field")?;
        if matches!(forcing, Forcing::Gaussian) {
            // int_0^T N(0, 1 + s)(0) ds
            let t = exps.horizon;
            let want = 2.0 * ((1.0 + t).sqrt() - 1.0) / (2.0 * std::f64::consts::PI).sqrt();
            let j0 = (0..grid.n)
                .min_by(|&a, &b| grid.x(a).abs().total_cmp(&grid.x(b).abs()))
                .unwrap();
            let got = sol.u.slice(sol.u.n_times() - 1)[j0];
            m.check("duhamel_oracle", (got - want).abs() <= p.duhamel_tol, got, want);

            if let Some(frac) = p.transport_fraction {
                let shape = SpaceTimeField::from_fn(f.times.clone(), grid, t, |s, x| {
                    if s > 0.0 {
                        s.powf(-1.0 / exps.q) * (-(x - 0.5).powi(2)).exp()
                    } else {
                        0.0
                    }
                })?;
                let g = shape.scaled(frac / k.c0 / weighted_norm(&shape, &exps)?);
                match solve_mild(&f, Some(&g), &exps, &p.options) {
                    Ok(s) => {
                        m.check("picard_contraction", s.contraction_ratio <= p.max_ratio, s.contraction_ratio, p.max_ratio);
                        m.json("transport_solution.json", &s.diagnostics())?;
                    }
                    Err(e @ Error::SmallnessViolated { norm, threshold, .. }) => {
                        m.diagnostic(e.to_string());
                        m.check("transport_smallness", false, norm, threshold);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    m.table(
        "gradient_bounds.csv",
        &["case", "f_norm", "sup_u", "sup_grad", "grad_rhs", "rhs"],
        &rows,
        None,
    )?;
    Ok(())
}

// ------------------------------------------------------------- krylov-check

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KrylovCase {
    /// `f = 1_[a,b]`, zero drift, lhs by quadrature (and by Monte Carlo).
    IndicatorBrownian { a: f64, b: f64, horizon: f64 },
    /// `f = |b1|` of the example drift, simulated with the example drift
    /// plus a bump.
    ExampleMagnitude { drift: ExampleDrift },
    /// `f = 1_[a,b]` under the example drift plus a bump.
    IndicatorExample { a: f64, b: f64, drift: ExampleDrift },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrylovParams {
    pub cases: Vec<KrylovCase>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub x0: f64,
}

impl Default for KrylovParams {
    fn default() -> Self {
        let drift = ExampleDrift {
            bump: 0.3,
            ..ExampleDrift::default()
        };
        Self {
            cases: vec![
                KrylovCase::IndicatorBrownian {
                    a: -1.0,
                    b: 1.0,
                    horizon: 1.0,
                },
                KrylovCase::ExampleMagnitude { drift },
                KrylovCase::IndicatorExample { a: -1.0, b: 1.0, drift },
            ],
            n_paths: 100_000,
            n_steps: 1024,
            x0: 0.0,
        }
    }
}

fn run_krylov(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.krylov_check.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for (i, case) in p.cases.iter().enumerate() {
        let (name, f, drift, horizon) = match case {
            KrylovCase::IndicatorBrownian { a, b, horizon } => (
                "indicator_brownian",
                TestFunction::Indicator { a: *a, b: *b, height: 1.0 },
                DriftSpec::zero(),
                *horizon,
            ),
            KrylovCase::ExampleMagnitude { drift } => {
                let d = drift.build(&cfg.exponents)?;
                let bare = DriftSpec::new(d.b1.clone(), BoundedPart::Zero);
                ("example_magnitude", TestFunction::DriftMagnitude { drift: bare }, d, drift.horizon)
            }
            KrylovCase::IndicatorExample { a, b, drift } => (
                "indicator_example",
                TestFunction::Indicator { a: *a, b: *b, height: 1.0 },
                drift.build(&cfg.exponents)?,
                drift.horizon,
            ),
        };
        let exps = cfg.exponents.with_horizon(horizon);
        let k = compute_constants(&exps)?;
        let mut sc = SimConfig::new(p.x0, p.n_paths, p.n_steps, derive_seed(cfg.seed, 0x6b72_0000 + i as u64));
        sc.workers = cfg.workers;
        let ens = euler_maruyama(&drift, horizon, &sc)?;
        let rep = krylov_check(&f, &drift, &ens, &k, &norm_grid())?;
        if let KrylovCase::IndicatorBrownian { a, b, horizon } = case {
            let exact = brownian_occupation(*a, *b, p.x0, *horizon);
            m.check(format!("krylov_{name}_analytic"), exact <= rep.rhs, exact, rep.rhs);
            m.check(
                format!("krylov_{name}_mc_vs_exact"),
                (rep.lhs - exact).abs() <= 3.0 * rep.lhs_se + 2.0 * horizon / p.n_steps as f64,
                rep.lhs,
                exact,
            );
        } else {
            m.check(format!("krylov_{name}"), rep.pass, rep.lhs, rep.rhs + 2.0 * rep.lhs_se);
            let nb = drift.reversed_weighted_norm(&norm_grid(), &exps)?;
            m.advisory(format!("drift_below_threshold_{name}"), nb < k.transform_threshold(), nb, k.transform_threshold());
        }
        m.advisory(
            format!("path_integrable_{name}"),
            ens.integrable_fraction() >= 0.99,
            ens.integrable_fraction(),
            0.99,
        );
        rows.push(vec![i as f64, rep.lhs, rep.lhs_se, rep.xi_integral, rep.reversed_norm, rep.rhs]);
        m.json(&format!("krylov_{name}.json"), &rep)?;
    }
    m.table("krylov.csv", &["case", "lhs", "lhs_se", "xi_integral", "reversed_norm", "rhs"], &rows, None)?;
    Ok(())
}

// ----------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCase {
    pub name: String,
    pub drift: DriftSpec,
    pub x0: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub cases: Vec<SimCase>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub modulus_gaps: Vec<usize>,
    /// Persist full ensembles (large).
    pub write_ensembles: bool,
    pub shard_size: usize,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            cases: vec![
                SimCase {
                    name: "brownian".into(),
                    drift: DriftSpec::zero(),
                    x0: 0.0,
                    horizon: 1.0,
                },
                SimCase {
                    name: "ornstein_uhlenbeck".into(),
                    drift: DriftSpec::zero().with_bounded(BoundedPart::Linear { rate: 1.0 }),
                    x0: 1.0,
                    horizon: 1.0,
                },
            ],
            n_paths: 100_000,
            n_steps: 1024,
            modulus_gaps: vec![1, 2, 4, 8, 16],
            write_ensembles: false,
            shard_size: 10_000,
        }
    }
}

/// Exact terminal mean and variance of the Euler scheme and of the SDE,
/// for drifts where both are available in closed form.
fn moment_oracle(d: &DriftSpec, x0: f64, t: f64, n: usize) -> Option<((f64, f64), (f64, f64))> {
    if !matches!(d.b1, SingularPart::Zero) {
        return None;
    }
    match d.b2 {
        BoundedPart::Zero => Some(((x0, t), (x0, t))),
        BoundedPart::Constant { c } => Some(((x0 + c * t, t), (x0 + c * t, t))),
        BoundedPart::Linear { rate } if rate > 0.0 => {
            let dt = t / n as f64;
            let a = 1.0 - rate * dt;
            let em = (x0 * a.powi(n as i32), dt * (1.0 - a.powi(2 * n as i32)) / (1.0 - a * a));
            let exact = (x0 * (-rate * t).exp(), (1.0 - (-2.0 * rate * t).exp()) / (2.0 * rate));
            Some((exact, em))
        }
        _ => None,
    }
}

fn run_simulate(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.simulate.clone().unwrap_or_default();
    let theta = holder_theta(cfg.exponents.q);
    let mut rows = Vec::new();
    for (i, case) in p.cases.iter().enumerate() {
        case.drift.validate()?;
        let mut sc = SimConfig::new(case.x0, p.n_paths, p.n_steps, derive_seed(cfg.seed, 0x7369_0000 + i as u64));
        sc.workers = cfg.workers;
        let ens = euler_maruyama(&case.drift, case.horizon, &sc)?;
        let name = &case.name;
        let x = ens.terminal();
        let (mean, mse) = mean_and_se(&x);
        let (var, vse) = variance_and_se(&x);
        if let Some(((m_ex, v_ex), (m_em, v_em))) = moment_oracle(&case.drift, case.x0, case.horizon, p.n_steps) {
            let mtol = 3.0 * mse + (m_em - m_ex).abs();
            let vtol = 3.0 * vse + (v_em - v_ex).abs();
            m.check(format!("{name}_mean"), (mean - m_ex).abs() <= mtol, mean, m_ex);
            m.check(format!("{name}_variance"), (var - v_ex).abs() <= vtol, var, v_ex);
        }
        m.check(format!("{name}_path_integrable"), ens.integrable_fraction() >= 0.99, ens.integrable_fraction(), 0.99);
        let modulus = increment_modulus(&ens, &p.modulus_gaps, theta)?;
        m.check(format!("{name}_increment_modulus"), modulus.pass, modulus.slope, modulus.threshold);
        let mrows: Vec<Vec<f64>> = modulus.points.iter().map(|&(g, v, s)| vec![g, v, s]).collect();
        m.table(
            &format!("modulus_{name}.csv"),
            &["gap", "mean_abs_increment", "stderr"],
            &mrows,
            Some(PlotHint {
                title: format!("increment modulus, {name}"),
                x: "gap".into(),
                y: vec!["mean_abs_increment".into()],
                log_x: true,
                log_y: true,
                annotation: Some(format!("fitted slope {:.4}", modulus.slope)),
            }),
        )?;
        rows.push(vec![i as f64, mean, mse, var, vse, ens.excluded_count() as f64, modulus.slope]);
        if p.write_ensembles {
            let files = ens.write(&m.dir, &format!("ensemble_{name}"), p.shard_size)?;
            m.add_files(&files, "ensemble")?;
        }
    }
    m.table(
        "moments.csv",
        &["case", "mean", "mean_se", "variance", "variance_se", "excluded", "modulus_slope"],
        &rows,
        None,
    )?;
    Ok(())
}

// ---------------------------------------------------------- zvonkin-compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZvonkinParams {
    pub sigma: SigmaSpec,
    pub drift: DriftSpec,
    pub x0: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub n_steps_list: Vec<usize>,
    pub calibration_pairs: usize,
    pub resolution: usize,
}

impl Default for ZvonkinParams {
    fn default() -> Self {
        Self {
            sigma: SigmaSpec::tanh_default(),
            drift: DriftSpec::zero().with_bounded(BoundedPart::IndicatorBump {
                a: -0.5,
                b: 0.5,
                height: 0.5,
            }),
            x0: 0.0,
            horizon: 1.0,
            n_paths: 20_000,
            n_steps_list: vec![256, 1024],
            calibration_pairs: 3,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

fn run_zvonkin(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.zvonkin_compare.clone().unwrap_or_default();
    p.drift.validate()?;
    let (_, d2) = p.sigma.bounds();
    let interval = working_interval(p.x0, p.horizon, d2, p.drift.bound_b2());
    let map = build_phi(&p.sigma, interval, p.resolution)?;
    let path = m.dir.join("phi.csv");
    map.write_csv(&path)?;
    m.add_file(&path, "map", None)?;
    let rt = map.roundtrip_error();
    m.check("roundtrip", rt <= 1e-6, rt, 1e-6);
    let bl = map.bilipschitz();
    m.check("bilipschitz_lower", bl.min_slope >= bl.lower - bl.tolerance, bl.min_slope, bl.lower);
    m.check("bilipschitz_upper", bl.max_slope <= bl.upper + bl.tolerance, bl.max_slope, bl.upper);

    let exps = cfg.exponents.with_horizon(p.horizon);
    let k = compute_constants(&exps)?;
    if !matches!(p.drift.b1, SingularPart::Zero) {
        let td = crate::zvonkin::transformed_drift(&p.drift, &p.sigma, &map)?;
        let r = crate::zvonkin::transformed_singular_norm(&td, &exps, &k, 4001)?;
        m.advisory("transformed_drift_small", r.below_threshold, r.total, r.threshold);
        m.json("transformed_norm.json", &r)?;
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, &n) in p.n_steps_list.iter().enumerate() {
        let mut sc = SimConfig::new(p.x0, p.n_paths, n, derive_seed(cfg.seed, 0x7a76_0000 + i as u64));
        sc.workers = cfg.workers;
        let r = compare_routes(&p.drift, &p.sigma, &map, p.horizon, &sc, p.calibration_pairs)?;
        m.check(format!("routes_agree_n{n}"), r.pass, r.ratio, 1.5);
        rows.push(vec![n as f64, r.ks_routes, r.noise_floor, r.ratio]);
        reports.push(r);
    }
    for w in reports.windows(2) {
        // refinement may not push the route distance above the noise band
        let ok = w[1].ks_routes <= w[0].ks_routes.max(1.5 * w[1].noise_floor);
        m.check(format!("refinement_n{}", w[1].n_steps), ok, w[1].ks_routes, w[0].ks_routes.max(1.5 * w[1].noise_floor));
    }
    m.table("routes.csv", &["n_steps", "ks_routes", "noise_floor", "ratio"], &rows, None)?;
    m.json("routes.json", &reports)?;
    Ok(())
}

// ------------------------------------------------------------- mollify-demo

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifyParams {
    pub n_list: Vec<u32>,
    pub amplitude: f64,
    pub width: f64,
    pub radius: f64,
    pub h: f64,
    pub target: f64,
}

impl Default for MollifyParams {
    fn default() -> Self {
        Self {
            n_list: vec![4, 16, 64, 256],
            amplitude: 1.0,
            width: 0.5,
            radius: 8.0,
            h: 1.0 / 512.0,
            target: 1e-2,
        }
    }
}

/// `t^{-1/q}` times a Gaussian profile on log-spaced times.
pub fn weighted_gaussian_field(exps: &ExponentPair, grid: Grid1d, amplitude: f64, width: f64) -> Result<SpaceTimeField> {
    let times = log_times(1e-8 * exps.horizon, exps.horizon, 4);
    let prof = Profile::gaussian(amplitude, width);
    let q = exps.q;
    SpaceTimeField::from_fn(times, grid, exps.horizon, |t, x| t.powf(-1.0 / q) * prof.eval(x))
}

fn run_mollify(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.mollify_demo.clone().unwrap_or_default();
    let grid = Grid1d::symmetric(p.radius, p.h)?;
    let f = weighted_gaussian_field(&cfg.exponents, grid, p.amplitude, p.width)?;
    let prof = mollification_profile(&f, &p.n_list, &cfg.exponents)?;
    let rows: Vec<Vec<f64>> = prof.iter().map(|&(n, e)| vec![n as f64, e]).collect();
    let slope = crate::mild::log_log_slope(&prof.iter().map(|&(n, e)| (n as f64, e)).collect::<Vec<_>>());
    m.table(
        "mollify_errors.csv",
        &["n", "weighted_error"],
        &rows,
        Some(PlotHint {
            title: "mollification error".into(),
            x: "n".into(),
            y: vec!["weighted_error".into()],
            log_x: true,
            log_y: true,
            annotation: slope.map(|s| format!("fitted slope {s:.3}")),
        }),
    )?;
    let last = prof.last().unwrap().1;
    m.check("final_error", last < p.target, last, p.target);
    let dec = prof.windows(2).all(|w| w[1].1 < w[0].1);
    m.check("strictly_decreasing", dec, dec as u8 as f64, 1.0);
    Ok(())
}

// ----------------------------------------------------------- counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleParams {
    pub k_max: u32,
    pub n_list: Vec<u32>,
    pub threshold: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        Self {
            k_max: 32,
            n_list: vec![4, 8, 16],
            threshold: 0.23,
        }
    }
}

fn run_counterexample(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.counterexample.clone().unwrap_or_default();
    let grid = default_grid(p.k_max)?;
    let f = counterexample_field(&grid, p.k_max)?;
    let table = lower_bound_table(&f, &p.n_list)?;
    let rows: Vec<Vec<f64>> = table.iter().map(|r| vec![r.n as f64, r.k_star as f64, r.sup_gap_sq]).collect();
    m.table("lower_bound.csv", &["n", "k_star", "sup_gap_sq"], &rows, None)?;
    for r in &table {
        m.check(format!("lower_bound_n{}", r.n), r.sup_gap_sq >= p.threshold, r.sup_gap_sq, p.threshold);
    }
    Ok(())
}

// ------------------------------------------------------------- feller-probe

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FellerParams {
    pub drift: ExampleDrift,
    pub observable: Observable,
    pub center: f64,
    pub half_span: f64,
    pub spacings: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Also check `P_1 1_(-inf,0](0) = 1/2` for zero drift.
    pub brownian_check: bool,
}

impl Default for FellerParams {
    fn default() -> Self {
        Self {
            drift: ExampleDrift::default(),
            observable: Observable::HalfLine { a: 0.0 },
            center: 0.0,
            half_span: 0.2,
            spacings: vec![0.2, 0.1, 0.05],
            n_paths: 20_000,
            n_steps: 256,
            brownian_check: true,
        }
    }
}

fn run_feller(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.feller_probe.clone().unwrap_or_default();
    let drift = p.drift.build(&cfg.exponents)?;
    let seed = derive_seed(cfg.seed, 0x6665_0000);
    let mut gaps = Vec::new();
    for &h in &p.spacings {
        if !(h > 0.0) {
            return Err(Error::Config(format!("spacing must be positive, got {h}")));
        }
        let k = (2.0 * p.half_span / h).round() as usize;
        let xs: Vec<f64> = (0..=k).map(|j| p.center - p.half_span + j as f64 * h).collect();
        let sim = |x: f64| {
            let mut sc = SimConfig::new(x, p.n_paths, p.n_steps, seed);
            sc.workers = cfg.workers;
            Ok(euler_maruyama(&drift, p.drift.horizon, &sc)?.terminal())
        };
        let probe = feller_probe(&p.observable, &xs, sim)?;
        let rows: Vec<Vec<f64>> = probe.rows.iter().map(|r| vec![r.x, r.estimate, r.stderr]).collect();
        m.table(&format!("probe_h{h}.csv"), &["x", "estimate", "stderr"], &rows, None)?;
        gaps.push((h, probe.max_gap, probe.max_gap_se));
    }
    for w in gaps.windows(2) {
        let allowance = 2.0 * w[0].2.max(w[1].2);
        m.check(format!("gap_shrinks_h{}", w[1].0), w[1].1 <= w[0].1 + allowance, w[1].1, w[0].1 + allowance);
    }
    let rows: Vec<Vec<f64>> = gaps.iter().map(|&(h, g, s)| vec![h, g, s]).collect();
    m.table(
        "probe_gaps.csv",
        &["spacing", "max_gap", "stderr"],
        &rows,
        Some(PlotHint {
            title: "largest adjacent gap of P_t f".into(),
            x: "spacing".into(),
            y: vec!["max_gap".into()],
            log_x: true,
            log_y: true,
            annotation: None,
        }),
    )?;
    if p.brownian_check {
        let mut sc = SimConfig::new(0.0, p.n_paths, p.n_steps, derive_seed(cfg.seed, 0x6662));
        sc.workers = cfg.workers;
        let x = euler_maruyama(&DriftSpec::zero(), 1.0, &sc)?.terminal();
        let v: Vec<f64> = x.iter().map(|&y| (y <= 0.0) as u8 as f64).collect();
        let (est, se) = mean_and_se(&v);
        m.check("brownian_half", (est - 0.5).abs() <= 3.0 * se, est, 0.5);
    }
    Ok(())
}

// ------------------------------------------------------------------ density

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityParams {
    pub n_paths: usize,
    pub n_steps: usize,
    pub r_list: Vec<f64>,
    pub drift: ExampleDrift,
    pub tolerance: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 256,
            r_list: vec![1.0, 2.0, 3.0],
            drift: ExampleDrift::default(),
            tolerance: 0.05,
        }
    }
}

fn run_density(cfg: &ExperimentConfig, m: &mut ManifestBuilder) -> Result<()> {
    let p = cfg.density.clone().unwrap_or_default();
    let mut sc = SimConfig::new(0.0, p.n_paths, p.n_steps, derive_seed(cfg.seed, 0x6465_0001));
    sc.workers = cfg.workers;
    let brown = kde(&euler_maruyama(&DriftSpec::zero(), 1.0, &sc)?.terminal(), Bandwidth::Silverman)?;
    sc.seed = derive_seed(cfg.seed, 0x6465_0002);
    let d = p.drift.build(&cfg.exponents)?;
    let ex = kde(&euler_maruyama(&d, p.drift.horizon, &sc)?.terminal(), Bandwidth::Silverman)?;
    for (name, est) in [("brownian", &brown), ("example", &ex)] {
        let rows: Vec<Vec<f64>> = est.grid.points().iter().zip(&est.values).map(|(&y, &v)| vec![y, v]).collect();
        m.table(&format!("density_{name}.csv"), &["y", "density"], &rows, None)?;
        m.check(format!("{name}_mass"), (est.mass() - 1.0).abs() < 1e-2, est.mass(), 1.0);
    }
    let mut rows = Vec::new();
    for &r in &p.r_list {
        let b = lr_norm_proxy(&brown, r)?;
        // int N(0,1)^r dy
        let closed = (2.0 * std::f64::consts::PI).powf(-(r - 1.0) / 2.0) / r.sqrt();
        m.check(format!("brownian_lr_r{r}"), (b.value / closed - 1.0).abs() <= p.tolerance, b.value, closed);
        let e = lr_norm_proxy(&ex, r)?;
        m.check(format!("example_lr_stable_r{r}"), e.stable, e.relative_change, 0.05);
        rows.push(vec![r, b.value, closed, e.value, e.relative_change]);
    }
    m.table("lr_proxy.csv", &["r", "brownian", "closed_form", "example", "example_change"], &rows, None)?;
    Ok(())
}

/// Runs the configured experiment in `out`, writes `manifest.json` and the
/// plot scripts, and returns the manifest.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut m = ManifestBuilder::new(out, cfg.experiment.name(), cfg.seed, cfg.strict)?;
    let cfg_path = out.join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg)?)?;
    m.add_file(&cfg_path, "config", None)?;
    match cfg.experiment {
        ExperimentKind::PdeSolve => run_pde(cfg, &mut m)?,
        ExperimentKind::KrylovCheck => run_krylov(cfg, &mut m)?,
        ExperimentKind::Simulate => run_simulate(cfg, &mut m)?,
        ExperimentKind::ZvonkinCompare => run_zvonkin(cfg, &mut m)?,
        ExperimentKind::MollifyDemo => run_mollify(cfg, &mut m)?,
        ExperimentKind::Counterexample => run_counterexample(cfg, &mut m)?,
        ExperimentKind::FellerProbe => run_feller(cfg, &mut m)?,
        ExperimentKind::Density => run_density(cfg, &mut m)?,
    }
    let scripts = crate::plots::emit_plots(m.manifest(), out)?;
    m.add_files(&scripts, "plot")?;
    m.finish()
}
