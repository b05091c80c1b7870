//! Nonnegative test functions `f(t, x)` integrated along paths.

use serde::{Deserialize, Serialize};

use crate::drift::{singular_time_factor, DriftSpec, SingularPart};
use crate::error::{domain, Result};
use crate::exponents::ExponentPair;
use crate::field::{log_times, SpaceTimeField};
use crate::grid::Grid1d;
use crate::quadrature::SingularRule;
use crate::spaces::weighted_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Zero,
    /// `height` on `[a, b]`, constant in time.
    Indicator { a: f64, b: f64, height: f64 },
    /// `|b1(t, x)|` of a drift, singular as `t -> T`.
    DriftMagnitude { drift: DriftSpec },
    Grid { field: SpaceTimeField },
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::Indicator { height, a, b } if *height < 0.0 || !(a < b) => {
                domain("indicator test function must be nonnegative on a nonempty interval")
            }
            TestFunction::Grid { field } if field.values().iter().any(|&v| v < 0.0) => {
                domain("test function changes sign; split it into positive and negative parts")
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Indicator { a, b, height } => {
                if x >= *a && x <= *b {
                    *height
                } else {
                    0.0
                }
            }
            TestFunction::DriftMagnitude { drift } => drift.b1.eval(t, x).abs(),
            TestFunction::Grid { field } => {
                let d = DriftSpec::new(
                    SingularPart::Grid { field: field.clone() },
                    crate::drift::BoundedPart::Zero,
                );
                d.b1.eval(t, x)
            }
        }
    }

    /// `(I_T f)(t, x) = f(T - t, x)`.
    pub fn eval_reversed(&self, horizon: f64, t: f64, x: f64) -> f64 {
        match self {
            TestFunction::DriftMagnitude { drift } => drift.b1.eval_reversed(horizon, t, x).abs(),
            _ => self.eval(horizon - t, x),
        }
    }

    /// `sup_t t^{1/q} ||I_T f(t)||_p` on a log-spaced time grid.
    pub fn reversed_weighted_norm(&self, grid: &Grid1d, exps: &ExponentPair) -> Result<f64> {
        if matches!(self, TestFunction::Zero) {
            return Ok(0.0);
        }
        let big_t = exps.horizon;
        let mut times = log_times(1e-12 * big_t, big_t, 8);
        if let TestFunction::Grid { field } = self {
            // the table's own nodes, mirrored
            times.extend(field.times.iter().map(|&s| big_t - s).filter(|&t| t > 0.0));
            times.sort_by(f64::total_cmp);
            times.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * big_t);
        }
        let field = SpaceTimeField::from_fn(times, *grid, big_t, |t, x| {
            self.eval_reversed(big_t, t, x)
        })?;
        weighted_norm(&field, exps)
    }

    /// Precomputed quadrature of `int f(t, X_t) dt` on a fixed time grid,
    /// freezing the state at the left end of each interval.
    pub fn path_integrator(&self, times: &[f64]) -> PathIntegrator<'_> {
        let time_weights = match self {
            TestFunction::Indicator { .. } => {
                Some(times.windows(2).map(|w| w[1] - w[0]).collect())
            }
            TestFunction::DriftMagnitude { drift } => match &drift.b1 {
                SingularPart::Example18 { q, horizon, .. } => {
                    Some(singular_interval_weights(times, *q, *horizon, true))
                }
                SingularPart::GaussianProfileWeighted { q, horizon, .. } => {
                    Some(singular_interval_weights(times, *q, *horizon, false))
                }
                _ => None,
            },
            _ => None,
        };
        PathIntegrator {
            f: self,
            times: times.to_vec(),
            time_weights,
        }
    }

    /// Spatial factor of the separable families.
    fn spatial(&self, x: f64) -> f64 {
        match self {
            TestFunction::Indicator { .. } => self.eval(0.0, x),
            TestFunction::DriftMagnitude { drift } => match &drift.b1 {
                SingularPart::Example18 { profile, .. }
                | SingularPart::GaussianProfileWeighted { profile, .. } => profile.eval(x).abs(),
                _ => 0.0,
            },
            _ => 0.0,
        }
    }
}

/// `int_{t_j}^{t_{j+1}} a(T - t) dt` for the singular time factors.
fn singular_interval_weights(times: &[f64], q: f64, horizon: f64, log: bool) -> Vec<f64> {
    let rule = SingularRule::default();
    times
        .windows(2)
        .map(|w| {
            let gap_end = horizon - w[1];
            rule.integrate_gaps(w[0], w[1], |_, to_end| {
                singular_time_factor(gap_end + to_end, q, log)
            })
        })
        .collect()
}

pub struct PathIntegrator<'a> {
    f: &'a TestFunction,
    times: Vec<f64>,
    time_weights: Option<Vec<f64>>,
}

impl PathIntegrator<'_> {
    /// `path[j]` is the state at `times[j]`.
    pub fn integrate(&self, path: &[f64]) -> f64 {
        match &self.time_weights {
            Some(w) => w
                .iter()
                .zip(path)
                .map(|(wj, &x)| {
                    if *wj == 0.0 {
                        0.0
                    } else {
                        wj * self.f.spatial(x)
                    }
                })
                .sum(),
            None => self
                .times
                .windows(2)
                .zip(path)
                .map(|(w, &x)| (w[1] - w[0]) * self.f.eval(0.5 * (w[0] + w[1]), x))
                .sum(),
        }
    }
}
