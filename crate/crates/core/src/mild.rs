//! Picard iteration for the mild form of
//! `du/dt = 1/2 u'' + g u' + f`, `u(0) = 0`, in one space dimension.
//!
//! The solver marches on a time grid graded toward `t = 0`. On each step the
//! source `G(s) = s^{1/q} (g u' + f)(s)` is taken piecewise linear, and the
//! time integrals of the kernel against `s^{-1/q}` hat functions are
//! precomputed once with the two-ended substitution rule:
//!
//! `u_{i+1} = K(dt) * u_i + A_i * G_i + B_i * G_{i+1}`
//!
//! and the same with gradient kernels for `u'`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolution::{convolve, CenteredKernel};
use crate::error::{domain, Error, Result};
use crate::exponents::ExponentPair;
use crate::field::SpaceTimeField;
use crate::grid::Grid1d;
use crate::heat::{compute_constants, grad_taps, heat_taps, KernelConstants};
use crate::quadrature::SingularRule;
use crate::spaces::{mirror_time, weighted_norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MildOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Coarsest step is `T / coarse_steps`.
    pub coarse_steps: usize,
    /// Geometric ratio of the refinement toward zero.
    pub ratio: f64,
    /// Smallest positive grid time as a fraction of `T`.
    pub t_min_frac: f64,
}

impl Default for MildOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            coarse_steps: 64,
            ratio: 1.2,
            t_min_frac: 1e-8,
        }
    }
}

/// Time grid on `[0, T]`: steps of `T / coarse_steps` refined geometrically
/// toward zero, down to `t_min_frac T`, then the origin.
pub fn solver_time_grid(horizon: f64, opts: &MildOptions) -> Vec<f64> {
    let coarse = horizon / opts.coarse_steps as f64;
    let t_min = opts.t_min_frac * horizon;
    let shrink = 1.0 - 1.0 / opts.ratio;
    let mut out = vec![horizon];
    let mut k = 0usize;
    let mut t = horizon;
    // the uniform part is laid out by index so that T - m T/64 is exact
    loop {
        let next = if t * shrink >= coarse {
            k += 1;
            horizon - k as f64 * coarse
        } else {
            t - t * shrink
        };
        if next <= t_min {
            out.push(t_min);
            break;
        }
        out.push(next);
        t = next;
    }
    out.push(0.0);
    out.reverse();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MildSolution {
    pub u: SpaceTimeField,
    pub grad_u: SpaceTimeField,
    pub iterations: usize,
    pub contraction_ratio: f64,
    pub residual: f64,
    pub constants: KernelConstants,
    pub f_norm: f64,
    pub g_norm: f64,
    /// `W^{1,inf}` distance between successive iterates.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MildDiagnostics {
    pub iterations: usize,
    pub contraction_ratio: f64,
    pub residual: f64,
    pub f_norm: f64,
    pub g_norm: f64,
    pub history: Vec<f64>,
    pub constants: KernelConstants,
}

impl MildSolution {
    pub fn diagnostics(&self) -> MildDiagnostics {
        MildDiagnostics {
            iterations: self.iterations,
            contraction_ratio: self.contraction_ratio,
            residual: self.residual,
            f_norm: self.f_norm,
            g_norm: self.g_norm,
            history: self.history.clone(),
            constants: self.constants,
        }
    }

    /// Writes `u`, `grad_u` and the diagnostics record; returns all paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let e = self.constants.exps;
        let (a, b) = self.u.write(dir, &format!("{stem}_u"), Some(&e))?;
        let (c, d) = self.grad_u.write(dir, &format!("{stem}_grad_u"), Some(&e))?;
        let diag = dir.join(format!("{stem}_diagnostics.json"));
        fs::write(&diag, serde_json::to_string_pretty(&self.diagnostics())?)?;
        Ok(vec![a, b, c, d, diag])
    }

    pub fn sup_u(&self) -> f64 {
        self.u.max_abs()
    }

    pub fn sup_grad(&self) -> f64 {
        self.grad_u.max_abs()
    }

    /// Largest gap between `grad_u` and centred differences of `u`.
    pub fn gradient_consistency(&self) -> f64 {
        let g = self.u.grid;
        let mut worst = 0.0_f64;
        for i in 0..self.u.n_times() {
            let d = g.derivative(self.u.slice(i));
            let gu = self.grad_u.slice(i);
            // one-sided ends are first order; compare the interior
            for j in 1..g.n - 1 {
                worst = worst.max((d[j] - gu[j]).abs());
            }
        }
        worst
    }
}

struct StepWeights {
    heat: CenteredKernel,
    left: CenteredKernel,
    right: CenteredKernel,
    grad_left: CenteredKernel,
    grad_right: CenteredKernel,
}

fn accumulate(into: &mut [f64], half: usize, k: &CenteredKernel, scale: f64) {
    let off = half - k.half;
    for (m, &v) in k.taps.iter().enumerate() {
        into[off + m] += scale * v;
    }
}

fn step_weights(t0: f64, t1: f64, grid: &Grid1d, q: f64, rule: &SingularRule) -> StepWeights {
    let dt = t1 - t0;
    let max_half = grid.n - 1;
    let heat = heat_taps(dt, grid.h, max_half);
    let half = heat.half.max(grad_taps(dt, grid.h, max_half).half);
    let len = 2 * half + 1;
    let (mut l, mut r, mut gl, mut gr) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for node in rule.nodes(t0, t1) {
        let tau = node.from_b;
        if tau <= 0.0 {
            continue;
        }
        let s = t0 + node.from_a;
        let base = node.weight * s.powf(-1.0 / q);
        let (wl, wr) = (base * tau / dt, base * node.from_a / dt);
        let k = heat_taps(tau, grid.h, half);
        accumulate(&mut l, half, &k, wl);
        accumulate(&mut r, half, &k, wr);
        let dk = grad_taps(tau, grid.h, half);
        accumulate(&mut gl, half, &dk, wl);
        accumulate(&mut gr, half, &dk, wr);
    }
    StepWeights {
        heat,
        left: CenteredKernel::new(l),
        right: CenteredKernel::new(r),
        grad_left: CenteredKernel::new(gl),
        grad_right: CenteredKernel::new(gr),
    }
}

/// Weighted slices `t^{1/q} f(t)` at the requested times, linear in time
/// between the field's positive grid times and constant beyond them.
pub fn weighted_samples(field: &SpaceTimeField, q: f64, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let idx: Vec<usize> = (0..field.n_times()).filter(|&i| field.times[i] > 0.0).collect();
    if idx.is_empty() {
        return domain("field needs at least one positive grid time");
    }
    let w = |i: usize| -> Vec<f64> {
        let c = field.times[i].powf(1.0 / q);
        field.slice(i).iter().map(|v| c * v).collect()
    };
    let ft: Vec<f64> = idx.iter().map(|&i| field.times[i]).collect();
    Ok(times
        .iter()
        .map(|&s| {
            if s <= ft[0] {
                return w(idx[0]);
            }
            if s >= *ft.last().unwrap() {
                return w(*idx.last().unwrap());
            }
            let k = ft.partition_point(|&x| x <= s);
            let (a, b) = (ft[k - 1], ft[k]);
            let th = (s - a) / (b - a);
            if th < 1e-14 {
                return w(idx[k - 1]);
            }
            let (va, vb) = (w(idx[k - 1]), w(idx[k]));
            va.iter().zip(&vb).map(|(x, y)| x * (1.0 - th) + y * th).collect()
        })
        .collect())
}

struct MildOperator {
    times: Vec<f64>,
    grid: Grid1d,
    steps: Vec<StepWeights>,
    gf: Vec<Vec<f64>>,
    gg: Option<Vec<Vec<f64>>>,
}

impl MildOperator {
    /// One application of the mild map to the gradient `dv` of the iterate.
    fn apply(&self, dv: Option<&[Vec<f64>]>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.grid.n;
        let source = |i: usize| -> Vec<f64> {
            let mut s = self.gf[i].clone();
            if let (Some(gg), Some(dv)) = (&self.gg, dv) {
                for ((o, a), b) in s.iter_mut().zip(&gg[i]).zip(&dv[i]) {
                    *o += a * b;
                }
            }
            s
        };
        let mut u = vec![vec![0.0; n]];
        let mut du = vec![vec![0.0; n]];
        let mut g_prev = source(0);
        if dv.is_some() && self.gg.is_some() {
            // the transport term vanishes at t = 0 with the initial gradient
            g_prev = self.gf[0].clone();
        }
        for (i, w) in self.steps.iter().enumerate() {
            let g_next = source(i + 1);
            let mut un = convolve(&u[i], &w.heat);
            let mut dn = convolve(&du[i], &w.heat);
            for (k, src) in [(&w.left, &g_prev), (&w.right, &g_next)] {
                for (o, v) in un.iter_mut().zip(convolve(src, k)) {
                    *o += v;
                }
            }
            for (k, src) in [(&w.grad_left, &g_prev), (&w.grad_right, &g_next)] {
                for (o, v) in dn.iter_mut().zip(convolve(src, k)) {
                    *o += v;
                }
            }
            u.push(un);
            du.push(dn);
            g_prev = g_next;
        }
        (u, du)
    }
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn into_field(slices: Vec<Vec<f64>>, times: &[f64], grid: Grid1d, horizon: f64) -> Result<SpaceTimeField> {
    SpaceTimeField::new(times.to_vec(), grid, horizon, 1, slices.concat())
}

fn check_dimension(exps: &ExponentPair) -> Result<()> {
    if exps.d != 1 {
        return Err(Error::Specification(format!(
            "the grid solver is one-dimensional; got d = {}",
            exps.d
        )));
    }
    Ok(())
}

fn solve_with_threshold(
    f: &SpaceTimeField,
    g: Option<&SpaceTimeField>,
    exps: &ExponentPair,
    opts: &MildOptions,
    threshold_factor: f64,
) -> Result<MildSolution> {
    check_dimension(exps)?;
    let constants = compute_constants(exps)?;
    let f_norm = weighted_norm(f, exps)?;
    let g_norm = match g {
        Some(g) => {
            if !g.grid.same_as(&f.grid) {
                return domain("f and g must share the spatial grid");
            }
            weighted_norm(g, exps)?
        }
        None => 0.0,
    };
    let threshold = threshold_factor / constants.c0;
    if g_norm >= threshold {
        return Err(Error::SmallnessViolated {
            norm: g_norm,
            threshold,
            ratio: constants.c0 * g_norm,
        });
    }

    let times = solver_time_grid(exps.horizon, opts);
    let grid = f.grid;
    let rule = SingularRule::default();
    let steps: Vec<StepWeights> = times
        .par_windows(2)
        .map(|w| step_weights(w[0], w[1], &grid, exps.q, &rule))
        .collect();
    let gf = weighted_samples(f, exps.q, &times)?;
    let gg = match g {
        Some(g) => Some(weighted_samples(g, exps.q, &times)?),
        None => None,
    };
    let has_g = gg.is_some();
    let op = MildOperator { times, grid, steps, gf, gg };

    let (mut u, mut du) = op.apply(None);
    let mut history = vec![sup_diff(&u, &vec![vec![0.0; grid.n]; u.len()])
        .max(sup_diff(&du, &vec![vec![0.0; grid.n]; du.len()]))];
    let mut iterations = 1;
    if has_g {
        while history.last().copied().unwrap_or(0.0) > opts.tol {
            if iterations >= opts.max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: *history.last().unwrap(),
                });
            }
            let (un, dn) = op.apply(Some(&du));
            history.push(sup_diff(&un, &u).max(sup_diff(&dn, &du)));
            u = un;
            du = dn;
            iterations += 1;
        }
    }
    // defect of the returned iterate under one more application
    let (ur, dr) = op.apply(if has_g { Some(&du) } else { None });
    let residual = sup_diff(&ur, &u).max(sup_diff(&dr, &du));
    let contraction_ratio = contraction_estimate(&history);

    let horizon = exps.horizon;
    Ok(MildSolution {
        u: into_field(u, &op.times, grid, horizon)?,
        grad_u: into_field(du, &op.times, grid, horizon)?,
        iterations,
        contraction_ratio,
        residual,
        constants,
        f_norm,
        g_norm,
        history,
    })
}

/// Largest ratio of successive iterate distances, ignoring distances at
/// round-off level where the ratio is meaningless.
fn contraction_estimate(history: &[f64]) -> f64 {
    let floor = 1e-13 * history.first().copied().unwrap_or(0.0);
    history
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

/// Solves the mild equation with source `f` and transport field `g`.
///
/// Refuses when `C0 ||g|| >= 1`, the regime where the map need not contract.
pub fn solve_mild(
    f: &SpaceTimeField,
    g: Option<&SpaceTimeField>,
    exps: &ExponentPair,
    opts: &MildOptions,
) -> Result<MildSolution> {
    solve_with_threshold(f, g, exps, opts, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub sup_u: f64,
    pub sup_grad: f64,
    /// `max(sup |u|, sup |u'|)`.
    pub lhs: f64,
    /// `C0 ||f|| / (1 - C0 ||g||)`.
    pub rhs: f64,
    /// `C_grad ||f||`, the gradient bound for `g = 0`.
    pub grad_rhs: f64,
    pub f_norm: f64,
    pub g_norm: f64,
    pub slack: f64,
    pub pass: bool,
    pub grad_pass: bool,
}

pub fn check_gradient_bound(
    sol: &MildSolution,
    f: &SpaceTimeField,
    g: Option<&SpaceTimeField>,
    slack: f64,
) -> Result<GradientBoundReport> {
    let e = sol.constants.exps;
    let f_norm = weighted_norm(f, &e)?;
    let g_norm = match g {
        Some(g) => weighted_norm(g, &e)?,
        None => 0.0,
    };
    let (sup_u, sup_grad) = (sol.sup_u(), sol.sup_grad());
    let lhs = sup_u.max(sup_grad);
    let rhs = sol.constants.solution_bound(f_norm, g_norm);
    let grad_rhs = sol.constants.c_grad * f_norm;
    Ok(GradientBoundReport {
        sup_u,
        sup_grad,
        lhs,
        rhs,
        grad_rhs,
        f_norm,
        g_norm,
        slack,
        pass: lhs <= rhs * (1.0 + slack),
        grad_pass: g.is_some() || sup_grad <= grad_rhs * (1.0 + slack),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub theta: f64,
    pub threshold: f64,
    /// `(|t - s|, ||u(t) - u(s)||_{W^{1,p}})` pairs used in the fit.
    pub moduli: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub pass: bool,
    pub skipped: bool,
    pub notice: Option<String>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fits the time modulus of `u` in `W^{1,p}` over dyadic gaps ending at `T`
/// and compares the slope with `theta / 2`.
pub fn time_holder_check(sol: &MildSolution, exps: &ExponentPair) -> HolderReport {
    let theta = crate::heat::holder_theta(exps.q);
    let threshold = theta / 2.0 - 0.1;
    if exps.q <= 2.0 {
        return HolderReport {
            theta,
            threshold,
            moduli: vec![],
            slope: None,
            pass: true,
            skipped: true,
            notice: Some(format!("theta vanishes for q = {} <= 2; check skipped", exps.q)),
        };
    }
    let times = &sol.u.times;
    let last = times.len() - 1;
    let horizon = times[last];
    let grid = sol.u.grid;
    let mut moduli = Vec::new();
    for k in 1..=6 {
        let target = horizon - horizon / 2f64.powi(k);
        let j = (0..last)
            .min_by(|&a, &b| (times[a] - target).abs().total_cmp(&(times[b] - target).abs()))
            .unwrap();
        let du: Vec<f64> = sol.u.slice(last).iter().zip(sol.u.slice(j)).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = sol
            .grad_u
            .slice(last)
            .iter()
            .zip(sol.grad_u.slice(j))
            .map(|(a, b)| a - b)
            .collect();
        let m = grid.lp_norm(&du, exps.p) + grid.lp_norm(&dg, exps.p);
        moduli.push((horizon - times[j], m));
    }
    let slope = log_log_slope(&moduli);
    let vacuous = moduli.iter().all(|&(_, m)| m == 0.0);
    HolderReport {
        theta,
        threshold,
        pass: vacuous || slope.is_some_and(|s| s >= threshold),
        slope,
        moduli,
        skipped: false,
        notice: vacuous.then(|| "all moduli vanish".to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSolution {
    pub solution: MildSolution,
    /// Weighted norm of the reversed field `I_T b1`.
    pub g_norm: f64,
    /// `C0 ||g|| / (1 - C0 ||g||)`, a bound for `max(|U|, |U'|)`.
    pub bound: f64,
    /// `1 - bound`.
    pub delta: f64,
    pub measured_sup: f64,
    /// Extremes of `1 + U'`, the derivative of `x + U`.
    pub grad_phi_min: f64,
    pub grad_phi_max: f64,
    /// `delta < 1 + U' < 2 - delta` everywhere.
    pub diffeomorphism: bool,
}

/// Solves `dU/dt = 1/2 U'' + g U' + g` with `g = I_T b1`.
///
/// `b1` is given on forward time and reversed here. Requires
/// `C0 ||g|| < 1/2`.
pub fn solve_transform_pde(
    b1: &SpaceTimeField,
    exps: &ExponentPair,
    opts: &MildOptions,
) -> Result<TransformSolution> {
    let g = mirror_time(b1)?;
    let solution = solve_with_threshold(&g, Some(&g), exps, opts, 0.5)?;
    let c0 = solution.constants.c0;
    let g_norm = solution.g_norm;
    let bound = c0 * g_norm / (1.0 - c0 * g_norm);
    let delta = 1.0 - bound;
    let measured_sup = solution.sup_u().max(solution.sup_grad());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in solution.grad_u.values() {
        lo = lo.min(1.0 + v);
        hi = hi.max(1.0 + v);
    }
    Ok(TransformSolution {
        g_norm,
        bound,
        delta,
        measured_sup,
        grad_phi_min: lo,
        grad_phi_max: hi,
        diffeomorphism: delta > 0.0 && lo > delta && hi < 2.0 - delta,
        solution,
    })
}
