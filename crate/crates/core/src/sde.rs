//! Euler-Maruyama for `dX = b(t, X) dt + sigma(X) dW` with drifts that may
//! blow up at the horizon, plus the path-functional checks built on it.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{Drift, DriftSpec};
use crate::error::{Error, Result};
use crate::exponents::ExponentPair;
use crate::grid::Grid1d;
use crate::heat::KernelConstants;
use crate::mild::log_log_slope;
use crate::rng::{derive_seed, PathRng};
use crate::spaces::weighted_norm;
use crate::stats::{ks_distance, mean_and_se};
use crate::testfn::TestFunction;

/// Largest tolerated share of excluded paths.
pub const MAX_EXCLUSION_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub x0: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Target number of recorded intervals on the uniform part.
    #[serde(default = "default_record_points")]
    pub record_points: usize,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_record_points() -> usize {
    128
}

impl SimConfig {
    pub fn new(x0: f64, n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            x0,
            n_paths,
            n_steps,
            seed,
            record_points: default_record_points(),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtPolicy {
    pub base_step: f64,
    pub n_steps: usize,
    /// Steps are clamped to `(T - t)/2` near the horizon.
    pub clamp: bool,
    /// Width of the final sliver `[T - eps, T]` stepped with frozen drift.
    pub freeze_eps: f64,
    pub record_stride: usize,
}

/// Time nodes of the scheme: uniform steps, then (when clamping) steps
/// halving toward `T` until within `T / n^2`, then one last step to `T`.
pub fn step_times(horizon: f64, n_steps: usize, clamp: bool) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    let mut out: Vec<f64> = (0..n_steps).map(|k| k as f64 * dt).collect();
    if clamp {
        let eps = horizon / (n_steps as f64 * n_steps as f64);
        let mut t = *out.last().unwrap();
        while horizon - t > eps {
            t += (horizon - t).min(2.0 * dt) / 2.0;
            out.push(t);
        }
    }
    out.push(horizon);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    /// Recorded times.
    pub times: Vec<f64>,
    /// Path-major states, `states[p * times.len() + j]`.
    pub states: Vec<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub x0: f64,
    pub horizon: f64,
    pub dt_policy: DtPolicy,
    /// Full-resolution `int_0^T |b(t, X_t)| dt` per path.
    pub drift_integral: Vec<f64>,
    pub excluded: Vec<bool>,
}

/// Noise coefficient for the simulator.
#[derive(Clone, Copy)]
pub enum Diffusion<'a> {
    Unit,
    Field(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl Diffusion<'_> {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self {
            Diffusion::Unit => 1.0,
            Diffusion::Field(f) => f(x),
        }
    }
}

struct PathOut {
    record: Vec<f64>,
    integral: f64,
    excluded: bool,
}

fn run_paths<R: Send>(workers: Option<usize>, n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Result<Vec<R>> {
    match workers {
        Some(w) if w > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
        }
        _ => Ok((0..n).into_par_iter().map(&f).collect()),
    }
}

/// General simulator; `euler_maruyama` is the unit-noise case.
pub fn simulate(
    drift: &dyn Drift,
    diffusion: Diffusion<'_>,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    if cfg.n_steps < 16 {
        return Err(Error::Domain(format!("need at least 16 steps, got {}", cfg.n_steps)));
    }
    if cfg.n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    if !(horizon > 0.0) || !cfg.x0.is_finite() {
        return Err(Error::Domain("horizon must be positive and x0 finite".into()));
    }
    let clamp = drift.singular_at_horizon();
    let grid = step_times(horizon, cfg.n_steps, clamp);
    let stride = (cfg.n_steps / cfg.record_points.max(1)).max(1);
    // record multiples of the stride and every node of the clamped tail
    let record: Vec<bool> = (0..grid.len())
        .map(|k| k % stride == 0 || k + 1 >= cfg.n_steps || k == grid.len() - 1)
        .collect();
    let times: Vec<f64> = grid.iter().zip(&record).filter(|(_, &r)| r).map(|(&t, _)| t).collect();
    let n_rec = times.len();

    let seed = cfg.seed;
    let x0 = cfg.x0;
    let sqrt_dt: Vec<f64> = grid.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let outs = run_paths(cfg.workers, cfg.n_paths, |p| {
        let mut rng = PathRng::new(seed, p as u64);
        let mut x = x0;
        let mut rec = Vec::with_capacity(n_rec);
        rec.push(x);
        let mut integral = 0.0;
        let mut excluded = false;
        for k in 0..grid.len() - 1 {
            let (t, dt) = (grid[k], grid[k + 1] - grid[k]);
            let z = rng.normal();
            if !excluded {
                let b = drift.eval(t, x);
                let s = diffusion.eval(x);
                let next = x + b * dt + s * sqrt_dt[k] * z;
                if b.is_finite() && next.is_finite() {
                    integral += b.abs() * dt;
                    x = next;
                } else {
                    excluded = true;
                }
            }
            if record[k + 1] {
                rec.push(x);
            }
        }
        PathOut {
            record: rec,
            integral,
            excluded,
        }
    })?;

    let mut states = Vec::with_capacity(cfg.n_paths * n_rec);
    let mut drift_integral = Vec::with_capacity(cfg.n_paths);
    let mut excluded = Vec::with_capacity(cfg.n_paths);
    for o in outs {
        states.extend(o.record);
        drift_integral.push(o.integral);
        excluded.push(o.excluded);
    }
    let n_ex = excluded.iter().filter(|&&e| e).count();
    if n_ex as f64 > MAX_EXCLUSION_RATE * cfg.n_paths as f64 {
        return Err(Error::ExcessiveExclusion {
            excluded: n_ex,
            total: cfg.n_paths,
        });
    }
    Ok(PathEnsemble {
        times,
        states,
        seed,
        n_paths: cfg.n_paths,
        x0,
        horizon,
        dt_policy: DtPolicy {
            base_step: horizon / cfg.n_steps as f64,
            n_steps: cfg.n_steps,
            clamp,
            freeze_eps: if clamp {
                horizon / (cfg.n_steps as f64).powi(2)
            } else {
                0.0
            },
            record_stride: stride,
        },
        drift_integral,
        excluded,
    })
}

pub fn euler_maruyama(drift: &dyn Drift, horizon: f64, cfg: &SimConfig) -> Result<PathEnsemble> {
    simulate(drift, Diffusion::Unit, horizon, cfg)
}

const ENSEMBLE_FORMAT: &str = "critdrift-ensemble/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleHeader {
    format: String,
    times: Vec<f64>,
    seed: u64,
    n_paths: usize,
    x0: f64,
    horizon: f64,
    dt_policy: DtPolicy,
    shards: Vec<String>,
}

impl PathEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let n = self.times.len();
        &self.states[p * n..(p + 1) * n]
    }

    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_paths).filter(|&p| !self.excluded[p])
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    /// States at recorded index `j` over included paths.
    pub fn marginal(&self, j: usize) -> Vec<f64> {
        self.included().map(|p| self.path(p)[j]).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.marginal(self.times.len() - 1)
    }

    /// Share of included paths with a finite drift integral.
    pub fn integrable_fraction(&self) -> f64 {
        let ok = self
            .included()
            .filter(|&p| self.drift_integral[p].is_finite())
            .count();
        ok as f64 / self.n_paths as f64
    }

    /// Header JSON plus CSV shards of at most `shard_size` paths.
    pub fn write(&self, dir: &Path, stem: &str, shard_size: usize) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let shard_size = shard_size.max(1);
        let mut written = Vec::new();
        let mut shards = Vec::new();
        for (s, start) in (0..self.n_paths).step_by(shard_size).enumerate() {
            let name = format!("{stem}_shard{s:04}.csv");
            let path = dir.join(&name);
            let mut w = BufWriter::new(fs::File::create(&path)?);
            write!(w, "path,excluded,drift_integral")?;
            for j in 0..self.n_times() {
                write!(w, ",x{j}")?;
            }
            writeln!(w)?;
            for p in start..(start + shard_size).min(self.n_paths) {
                write!(w, "{p},{},{}", self.excluded[p] as u8, self.drift_integral[p])?;
                for v in self.path(p) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
            w.flush()?;
            shards.push(name);
            written.push(path);
        }
        let header = EnsembleHeader {
            format: ENSEMBLE_FORMAT.into(),
            times: self.times.clone(),
            seed: self.seed,
            n_paths: self.n_paths,
            x0: self.x0,
            horizon: self.horizon,
            dt_policy: self.dt_policy,
            shards,
        };
        let hp = dir.join(format!("{stem}.json"));
        fs::write(&hp, serde_json::to_string_pretty(&header)?)?;
        written.insert(0, hp);
        Ok(written)
    }

    pub fn read(header_path: &Path) -> Result<Self> {
        let h: EnsembleHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
        if h.format != ENSEMBLE_FORMAT {
            return Err(Error::Data(format!("unknown ensemble format {}", h.format)));
        }
        let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
        let n = h.times.len();
        let mut states = Vec::with_capacity(h.n_paths * n);
        let mut drift_integral = Vec::with_capacity(h.n_paths);
        let mut excluded = Vec::with_capacity(h.n_paths);
        let bad = |m: &str| Error::Data(format!("ensemble shard: {m}"));
        for shard in &h.shards {
            let r = BufReader::new(fs::File::open(dir.join(shard))?);
            for line in r.lines().skip(1) {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 + n {
                    return Err(bad("wrong column count"));
                }
                excluded.push(cols[1] == "1");
                drift_integral.push(cols[2].parse().map_err(|_| bad("bad number"))?);
                for c in &cols[3..] {
                    states.push(c.parse().map_err(|_| bad("bad number"))?);
                }
            }
        }
        if excluded.len() != h.n_paths {
            return Err(bad("path count does not match header"));
        }
        Ok(PathEnsemble {
            times: h.times,
            states,
            seed: h.seed,
            n_paths: h.n_paths,
            x0: h.x0,
            horizon: h.horizon,
            dt_policy: h.dt_policy,
            drift_integral,
            excluded,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovReport {
    /// Monte Carlo mean of `int_0^T f(t, X_t) dt`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Mean of `int_0^T |b(t, X_t)| dt` on the recorded grid.
    pub xi_integral: f64,
    pub xi_se: f64,
    /// Same at full step resolution.
    pub xi_integral_full: f64,
    pub reversed_norm: f64,
    pub c0: f64,
    /// `C0 (1 + E int |xi|) ||I_T f||`.
    pub rhs: f64,
    pub pass: bool,
    pub n_paths: usize,
}

/// Compares `E int f(t, X_t) dt` with `C0 (1 + E int |b|) ||I_T f||`.
///
/// `norm_grid` is the spatial grid for the weighted norm of `I_T f`.
pub fn krylov_check(
    f: &TestFunction,
    drift: &dyn Drift,
    ensemble: &PathEnsemble,
    constants: &KernelConstants,
    norm_grid: &Grid1d,
) -> Result<KrylovReport> {
    f.validate()?;
    let exps = constants.exps.with_horizon(ensemble.horizon);
    let reversed_norm = f.reversed_weighted_norm(norm_grid, &exps)?;
    let integ = f.path_integrator(&ensemble.times);
    let t = &ensemble.times;
    let mut fvals = Vec::with_capacity(ensemble.n_paths);
    let mut xis = Vec::with_capacity(ensemble.n_paths);
    let mut full = Vec::with_capacity(ensemble.n_paths);
    for p in ensemble.included() {
        let path = ensemble.path(p);
        fvals.push(integ.integrate(path));
        let xi: f64 = t
            .windows(2)
            .zip(path)
            .map(|(w, &x)| (w[1] - w[0]) * drift.eval(w[0], x).abs())
            .sum();
        xis.push(xi);
        full.push(ensemble.drift_integral[p]);
    }
    let (lhs, lhs_se) = mean_and_se(&fvals);
    let (xi_integral, xi_se) = mean_and_se(&xis);
    let (xi_integral_full, _) = mean_and_se(&full);
    let rhs = constants.c0 * (1.0 + xi_integral) * reversed_norm;
    Ok(KrylovReport {
        lhs,
        lhs_se,
        xi_integral,
        xi_se,
        xi_integral_full,
        reversed_norm,
        c0: constants.c0,
        rhs,
        pass: lhs <= rhs + 2.0 * lhs_se,
        n_paths: fvals.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    /// `(gap, E|X_{t+gap} - X_t|, standard error)`.
    pub points: Vec<(f64, f64, f64)>,
    pub slope: f64,
    pub theta: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Mean absolute increments over gaps of `gaps[i]` recorded steps, averaged
/// over all start points of the uniform part of the recorded grid.
pub fn increment_modulus(ensemble: &PathEnsemble, gaps: &[usize], theta: f64) -> Result<ModulusReport> {
    let uniform = ensemble.dt_policy.n_steps / ensemble.dt_policy.record_stride;
    let dt_rec = ensemble.dt_policy.base_step * ensemble.dt_policy.record_stride as f64;
    let usable: Vec<usize> = gaps.iter().copied().filter(|&k| k > 0 && k < uniform).collect();
    if usable.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 gap scales inside the recorded grid, got {}",
            usable.len()
        )));
    }
    let mut points = Vec::new();
    for &k in &usable {
        // per-path averages keep the standard error honest about correlation
        let per_path: Vec<f64> = ensemble
            .included()
            .map(|p| {
                let x = ensemble.path(p);
                let n = uniform - k + 1;
                (0..n).map(|j| (x[j + k] - x[j]).abs()).sum::<f64>() / n as f64
            })
            .collect();
        let (m, se) = mean_and_se(&per_path);
        points.push((k as f64 * dt_rec, m, se));
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|&(g, m, _)| (g, m)).collect();
    let slope = log_log_slope(&pairs).ok_or_else(|| Error::Fit("degenerate modulus".into()))?;
    let threshold = theta / 2.0 - 0.1;
    Ok(ModulusReport {
        points,
        slope,
        theta,
        threshold,
        pass: slope >= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u32,
    /// `||I_T b1^n - I_T b1||` in the weighted norm.
    pub weighted_error: f64,
    /// KS distance of terminal laws, mollified versus original drift.
    pub law_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// KS distance between two independent runs with the original drift.
    pub noise_floor: f64,
    pub weighted_nonincreasing: bool,
    pub distance_nonincreasing: bool,
}

/// Simulates mollified drifts `b1^n + b2` on shared noise and tracks both
/// the weighted drift error and the terminal-law distance.
pub fn mollified_drift_convergence(
    drift: &DriftSpec,
    n_list: &[u32],
    grid: &Grid1d,
    exps: &ExponentPair,
    cfg: &SimConfig,
) -> Result<ConvergenceReport> {
    let horizon = exps.horizon;
    let times = crate::field::log_times(1e-12 * horizon, horizon, 8);
    let base = drift.reversed_b1_field(grid, &times, horizon)?;
    let reference = euler_maruyama(drift, horizon, cfg)?;
    let ref_terminal = reference.terminal();
    let mut other = *cfg;
    other.seed = derive_seed(cfg.seed, 0x006e_6f69_7365);
    let noise_floor = ks_distance(&ref_terminal, &euler_maruyama(drift, horizon, &other)?.terminal())?;
    let mut rows = Vec::new();
    for &n in n_list {
        let dn = drift.mollified(grid, n)?;
        let fld = dn.reversed_b1_field(grid, &times, horizon)?;
        let weighted_error = weighted_norm(&fld.sub(&base)?, exps)?;
        let ens = euler_maruyama(&dn, horizon, cfg)?;
        rows.push(ConvergenceRow {
            n,
            weighted_error,
            law_distance: ks_distance(&ens.terminal(), &ref_terminal)?,
        });
    }
    let nonincreasing = |v: Vec<f64>, rel: f64, abs: f64| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel) + abs);
    Ok(ConvergenceReport {
        weighted_nonincreasing: nonincreasing(rows.iter().map(|r| r.weighted_error).collect(), 0.1, 0.0),
        distance_nonincreasing: nonincreasing(
            rows.iter().map(|r| r.law_distance).collect(),
            0.1,
            // distances at the noise floor fluctuate freely
            0.1 * noise_floor,
        ),
        rows,
        noise_floor,
    })
}

/// `int_0^T P(a <= x0 + W_t <= b) dt`, the occupation of `[a, b]` by
/// Brownian motion, integrated in `u = sqrt(t)`.
pub fn brownian_occupation(a: f64, b: f64, x0: f64, horizon: f64) -> f64 {
    use crate::special::norm_interval;
    let gl = crate::quadrature::GaussLegendre::standard();
    let su = horizon.sqrt();
    let inner = |u: f64| {
        if u == 0.0 {
            return if x0 > a && x0 < b { 1.0 } else { 0.0 };
        }
        norm_interval((a - x0) / u, (b - x0) / u)
    };
    // the integrand has kinks where the interval ends cross x0, so panel it
    (0..16)
        .map(|k| {
            let (lo, hi) = (su * k as f64 / 16.0, su * (k + 1) as f64 / 16.0);
            gl.integrate(lo, hi, |u| 2.0 * u * inner(u))
        })
        .sum()
}
