//! Weighted norms `sup_t t^{1/q} ||f(t)||_p`, membership in the vanishing
//! subspace, time reversal and an `L^q(0,T;L^p)` divergence test.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exponents::ExponentPair;
use crate::field::SpaceTimeField;

/// Default threshold on the weighted limit at `t -> 0`.
pub const DEFAULT_C0Q_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceMembership {
    pub linf_q_norm: f64,
    pub cq_norm: Option<f64>,
    pub limit_at_zero: f64,
    pub in_c0q: bool,
    pub tolerance: f64,
}

fn check_finite(field: &SpaceTimeField) -> Result<()> {
    if field.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("field contains non-finite values".into()));
    }
    if field.n_times() == 0 {
        return domain("field has an empty time grid");
    }
    Ok(())
}

/// `(t, t^{1/q} ||f(t)||_p)` for every grid time.
pub fn weighted_profile(field: &SpaceTimeField, exps: &ExponentPair) -> Result<Vec<(f64, f64)>> {
    check_finite(field)?;
    Ok(field
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, exps.weight(t) * field.slice_norm(i, exps.p)))
        .collect())
}

pub fn weighted_norm(field: &SpaceTimeField, exps: &ExponentPair) -> Result<f64> {
    Ok(weighted_profile(field, exps)?
        .into_iter()
        .fold(0.0_f64, |m, (_, v)| m.max(v)))
}

/// Weighted norm of `f - g` without materialising the difference.
pub fn weighted_distance(
    f: &SpaceTimeField,
    g: &SpaceTimeField,
    exps: &ExponentPair,
) -> Result<f64> {
    weighted_norm(&f.sub(g)?, exps)
}

pub fn classify_space(
    field: &SpaceTimeField,
    exps: &ExponentPair,
    tol: f64,
) -> Result<SpaceMembership> {
    let profile = weighted_profile(field, exps)?;
    let (t_min, limit_at_zero) = profile[0];
    if !(t_min > 0.0) {
        return domain("smallest grid time must be positive to estimate the weighted limit");
    }
    let linf_q_norm = profile.iter().fold(0.0_f64, |m, &(_, v)| m.max(v));
    // every grid function is continuous once interpolated in time, so the
    // C_q norm is available as soon as there is more than one slice
    let cq_norm = (profile.len() > 1).then_some(linf_q_norm);
    Ok(SpaceMembership {
        linf_q_norm,
        cq_norm,
        limit_at_zero,
        in_c0q: limit_at_zero <= tol,
        tolerance: tol,
    })
}

/// True when the time grid is mapped onto itself by `t -> T - t`.
pub fn is_time_symmetric(field: &SpaceTimeField) -> bool {
    let n = field.times.len();
    let tol = 1e-12 * field.horizon;
    (0..n).all(|i| (field.times[i] + field.times[n - 1 - i] - field.horizon).abs() <= tol)
}

/// `(I_T f)(t) = f(T - t)` on a symmetric grid; exact index reversal.
pub fn reverse_time(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    if !is_time_symmetric(field) {
        return domain("time grid is not symmetric under t -> T - t; use reverse_time_resampled");
    }
    let n = field.n_times();
    let mut values = Vec::with_capacity(field.values().len());
    for i in (0..n).rev() {
        for c in 0..field.components {
            values.extend_from_slice(field.component(i, c));
        }
    }
    SpaceTimeField::new(
        field.times.clone(),
        field.grid,
        field.horizon,
        field.components,
        values,
    )
}

/// Reversal onto arbitrary output times by linear interpolation in time.
pub fn reverse_time_resampled(field: &SpaceTimeField, times: &[f64]) -> Result<SpaceTimeField> {
    let (lo, hi) = (field.times[0], *field.times.last().unwrap());
    let mut values = Vec::with_capacity(times.len() * field.components * field.grid.n);
    for &t in times {
        let s = field.horizon - t;
        if s < lo - 1e-12 * field.horizon || s > hi + 1e-12 * field.horizon {
            return domain(format!("reversed time {s} lies outside the field's time range"));
        }
        let k = field.times.partition_point(|&x| x <= s).clamp(1, field.n_times().max(2) - 1);
        for c in 0..field.components {
            if field.n_times() == 1 {
                values.extend_from_slice(field.component(0, c));
                continue;
            }
            let (t0, t1) = (field.times[k - 1], field.times[k]);
            let w = ((s - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let (a, b) = (field.component(k - 1, c), field.component(k, c));
            values.extend(a.iter().zip(b).map(|(x, y)| x * (1.0 - w) + y * w));
        }
    }
    SpaceTimeField::new(
        times.to_vec(),
        field.grid,
        field.horizon,
        field.components,
        values,
    )
}

/// Exact reversal onto the mirrored times `T - t_i`, for any grid.
pub fn mirror_time(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    let n = field.n_times();
    let times: Vec<f64> = (0..n)
        .rev()
        .map(|i| (field.horizon - field.times[i]).max(0.0))
        .collect();
    let mut values = Vec::with_capacity(field.values().len());
    for i in (0..n).rev() {
        for c in 0..field.components {
            values.extend_from_slice(field.component(i, c));
        }
    }
    SpaceTimeField::new(times, field.grid, field.horizon, field.components, values)
}

/// Result of the `L^r(0,T;L^p)` test for a field singular at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub exponent: f64,
    /// Quadrature of `int ||f(t)||_p^r dt` over the grid.
    pub integral: f64,
    /// Contributions of the shells `ln(T/t) in [2^k, 2^{k+1})`.
    pub shells: Vec<f64>,
    /// Geometric mean of the last shell-to-shell ratios.
    pub tail_ratio: f64,
    pub diverges: bool,
}

/// Ratio at or above which the shell sums are taken to diverge.
const DIVERGENCE_RATIO: f64 = 0.95;

/// Tests `int_0^T ||f(t)||_p^r dt < inf` from the grid down to `t_min`.
///
/// Shells are doubly exponential in `t`: for `||f||^r ~ t^-1 |log t|^-g` the
/// ratio of consecutive shells tends to `2^{1-g}`, so anything at or above
/// one flags divergence while power-type blow-up gives huge ratios. The grid
/// must be log-spaced enough to reach at least four shells.
pub fn lq_integrability(field: &SpaceTimeField, p: f64, r: f64) -> Result<IntegrabilityReport> {
    check_finite(field)?;
    let big_t = field.horizon;
    let pts: Vec<(f64, f64)> = field
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, &t)| {
            let v = field.slice_norm(i, p).powf(r);
            ((big_t / t).ln(), v * t)
        })
        .collect();
    if pts.len() < 2 {
        return domain("integrability check needs at least two positive grid times");
    }
    // total integral: trapezoid in t over the grid plus the piece below t_min
    let mut integral = 0.0;
    for w in field.times.windows(2).enumerate() {
        let (i, pair) = w;
        if pair[0] <= 0.0 {
            continue;
        }
        let a = field.slice_norm(i, p).powf(r);
        let b = field.slice_norm(i + 1, p).powf(r);
        integral += 0.5 * (a + b) * (pair[1] - pair[0]);
    }

    // points sorted by u = ln(T/t), ascending
    let mut up: Vec<(f64, f64)> = pts;
    up.sort_by(|a, b| a.0.total_cmp(&b.0));
    let u_max = up.last().unwrap().0;
    let u_min = up[0].0.max(1.0);
    let k0 = u_min.log2().ceil() as i32;
    let k1 = u_max.log2().floor() as i32;
    let mut shells = Vec::new();
    for k in k0..k1 {
        let (a, b) = (2f64.powi(k), 2f64.powi(k + 1));
        shells.push(integrate_piecewise_linear(&up, a, b));
    }
    if shells.len() < 4 {
        return domain(format!(
            "time grid reaches only {} log-shells; extend it toward t = 0",
            shells.len()
        ));
    }
    let tail = &shells[shells.len() - 3..];
    let prev = &shells[shells.len() - 4..shells.len() - 1];
    let mut log_sum = 0.0;
    let mut count = 0;
    let mut infinite = false;
    for (x, y) in prev.iter().zip(tail) {
        if *x > 0.0 && *y > 0.0 {
            log_sum += (y / x).ln();
            count += 1;
        } else if *x == 0.0 && *y > 0.0 {
            infinite = true;
        }
    }
    let tail_ratio = if infinite {
        f64::INFINITY
    } else if count == 0 {
        0.0
    } else {
        (log_sum / count as f64).exp()
    };
    Ok(IntegrabilityReport {
        exponent: r,
        integral,
        shells,
        tail_ratio,
        diverges: tail_ratio >= DIVERGENCE_RATIO,
    })
}

fn integrate_piecewise_linear(pts: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let eval = |u: f64| {
        let k = pts.partition_point(|p| p.0 <= u).clamp(1, pts.len() - 1);
        let (u0, v0) = pts[k - 1];
        let (u1, v1) = pts[k];
        v0 + (v1 - v0) * (u - u0) / (u1 - u0)
    };
    let mut knots = vec![a];
    knots.extend(pts.iter().map(|p| p.0).filter(|&u| u > a && u < b));
    knots.push(b);
    knots
        .windows(2)
        .map(|w| 0.5 * (eval(w[0]) + eval(w[1])) * (w[1] - w[0]))
        .sum()
}
