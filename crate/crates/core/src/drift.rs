//! Drift catalog `b = b1 + b2`: a singular part blowing up at `t = T` and a
//! bounded (or at least locally bounded) part.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exponents::ExponentPair;
use crate::field::{log_times, SpaceTimeField};
use crate::grid::Grid1d;
use crate::mollifier::{mollify, mollify_slice, MollifierSpec};
use crate::spaces::weighted_norm;

/// Anything the path simulator can evaluate.
pub trait Drift: Sync {
    fn eval(&self, t: f64, x: f64) -> f64;

    /// True when the drift may blow up as `t -> T`, which switches on the
    /// step clamp near the horizon.
    fn singular_at_horizon(&self) -> bool {
        false
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Drift for F {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// Spatial profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `height` on `[a, b]`.
    Indicator { a: f64, b: f64, height: f64 },
    /// Linear interpolation of samples, zero off the grid.
    Grid { grid: Grid1d, values: Vec<f64> },
}

impl Profile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Profile::Gaussian {
            amplitude,
            width,
            center: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let z = (x - center) / width;
                amplitude * (-0.5 * z * z).exp()
            }
            Profile::Indicator { a, b, height } => {
                if x >= *a && x <= *b {
                    *height
                } else {
                    0.0
                }
            }
            Profile::Grid { grid, values } => grid.interpolate(values, x),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Profile::Gaussian { amplitude, .. } => amplitude.abs(),
            Profile::Indicator { height, .. } => height.abs(),
            Profile::Grid { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Profile::Gaussian {
                amplitude,
                width,
                center,
            } => amplitude.is_finite() && center.is_finite() && *width > 0.0 && width.is_finite(),
            Profile::Indicator { a, b, height } => {
                a.is_finite() && b.is_finite() && a < b && height.is_finite()
            }
            Profile::Grid { grid, values } => {
                values.len() == grid.n && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            domain(format!("profile has infinite or ill-formed parameters: {self:?}"))
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self.clone() {
            Profile::Gaussian {
                amplitude,
                width,
                center,
            } => Profile::Gaussian {
                amplitude: c * amplitude,
                width,
                center,
            },
            Profile::Indicator { a, b, height } => Profile::Indicator {
                a,
                b,
                height: c * height,
            },
            Profile::Grid { grid, values } => Profile::Grid {
                grid,
                values: values.into_iter().map(|v| c * v).collect(),
            },
        }
    }
}

/// Singular part `b1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingularPart {
    Zero,
    /// `(T-t)^{-1/q} |log(T-t)|^{-1} profile(x)`, needs `T < 1`.
    #[serde(rename = "example_1_8")]
    Example18 { profile: Profile, q: f64, horizon: f64 },
    /// `(T-t)^{-1/q} profile(x)`: finite reversed norm, but without the
    /// logarithm the weighted limit does not vanish.
    GaussianProfileWeighted { profile: Profile, q: f64, horizon: f64 },
    /// Tabulated field, linear in time and space.
    Grid { field: SpaceTimeField },
}

/// Bounded part `b2`, time independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundedPart {
    Zero,
    Constant { c: f64 },
    /// `-rate * x`; only locally bounded.
    Linear { rate: f64 },
    /// `height` on `[a, b]`.
    IndicatorBump { a: f64, b: f64, height: f64 },
    Grid { grid: Grid1d, values: Vec<f64> },
}

impl BoundedPart {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BoundedPart::Zero => 0.0,
            BoundedPart::Constant { c } => *c,
            BoundedPart::Linear { rate } => -rate * x,
            BoundedPart::IndicatorBump { a, b, height } => {
                if x >= *a && x <= *b {
                    *height
                } else {
                    0.0
                }
            }
            BoundedPart::Grid { grid, values } => {
                // constant extension beyond the table
                let xc = x.clamp(grid.x_min, grid.x_max());
                grid.interpolate(values, xc)
            }
        }
    }

    /// Sup bound; infinite for the linear family.
    pub fn bound(&self) -> f64 {
        match self {
            BoundedPart::Zero => 0.0,
            BoundedPart::Constant { c } => c.abs(),
            BoundedPart::Linear { rate } => {
                if *rate == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BoundedPart::IndicatorBump { height, .. } => height.abs(),
            BoundedPart::Grid { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub b1: SingularPart,
    pub b2: BoundedPart,
    /// Known sup bound of `b2`; filled in from the family when absent.
    #[serde(default)]
    pub bound_b2: Option<f64>,
}

impl SingularPart {
    /// Time factor `a(T - t)` and profile for the separable families.
    fn separable(&self) -> Option<(&Profile, f64, f64, bool)> {
        match self {
            SingularPart::Example18 { profile, q, horizon } => Some((profile, *q, *horizon, true)),
            SingularPart::GaussianProfileWeighted { profile, q, horizon } => {
                Some((profile, *q, *horizon, false))
            }
            _ => None,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            SingularPart::Zero => 0.0,
            SingularPart::Grid { field } => eval_field(field, t, x),
            _ => {
                let (profile, q, horizon, log) = self.separable().unwrap();
                let v = profile.eval(x);
                if v == 0.0 {
                    return 0.0;
                }
                v * singular_time_factor(horizon - t, q, log)
            }
        }
    }

    /// `b1(T - t, x)` with the time factor evaluated at `t` directly, so the
    /// reversed field stays exact for tiny `t`.
    pub fn eval_reversed(&self, horizon: f64, t: f64, x: f64) -> f64 {
        match self {
            SingularPart::Zero => 0.0,
            SingularPart::Grid { field } => eval_field(field, horizon - t, x),
            _ => {
                let (profile, q, _, log) = self.separable().unwrap();
                let v = profile.eval(x);
                if v == 0.0 {
                    return 0.0;
                }
                v * singular_time_factor(t, q, log)
            }
        }
    }

    pub fn horizon(&self) -> Option<f64> {
        match self {
            SingularPart::Zero => None,
            SingularPart::Grid { field } => Some(field.horizon),
            _ => self.separable().map(|s| s.2),
        }
    }
}

/// `s^{-1/q} |log s|^{-1}` (or without the log); infinite at `s <= 0`.
pub fn singular_time_factor(s: f64, q: f64, log: bool) -> f64 {
    if s <= 0.0 {
        return f64::INFINITY;
    }
    let w = s.powf(-1.0 / q);
    if log {
        w / s.ln().abs()
    } else {
        w
    }
}

fn eval_field(field: &SpaceTimeField, t: f64, x: f64) -> f64 {
    let times = &field.times;
    let n = times.len();
    if n == 1 || t <= times[0] {
        return field.grid.interpolate(field.slice(0), x);
    }
    if t >= times[n - 1] {
        return field.grid.interpolate(field.slice(n - 1), x);
    }
    let k = times.partition_point(|&s| s <= t);
    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    let a = field.grid.interpolate(field.slice(k - 1), x);
    let b = field.grid.interpolate(field.slice(k), x);
    a * (1.0 - w) + b * w
}

impl Drift for DriftSpec {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self.b1.eval(t, x) + self.b2.eval(x)
    }

    fn singular_at_horizon(&self) -> bool {
        matches!(
            self.b1,
            SingularPart::Example18 { .. } | SingularPart::GaussianProfileWeighted { .. }
        )
    }
}

impl DriftSpec {
    pub fn zero() -> Self {
        Self::new(SingularPart::Zero, BoundedPart::Zero)
    }

    pub fn new(b1: SingularPart, b2: BoundedPart) -> Self {
        let bound = b2.bound();
        Self {
            b1,
            b2,
            bound_b2: Some(bound),
        }
    }

    pub fn with_bounded(mut self, b2: BoundedPart) -> Self {
        self.bound_b2 = Some(b2.bound());
        self.b2 = b2;
        self
    }

    pub fn bound_b2(&self) -> f64 {
        self.bound_b2.unwrap_or_else(|| self.b2.bound())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.bound_b2 {
            if b < self.b2.bound() {
                return Err(Error::Specification(format!(
                    "declared bound {b} is below the family's sup {}",
                    self.b2.bound()
                )));
            }
        }
        match &self.b1 {
            SingularPart::Zero => Ok(()),
            SingularPart::Grid { field } => field.validate(),
            SingularPart::Example18 { profile, q, horizon } => {
                profile.validate()?;
                if !(*horizon > 0.0 && *horizon < 1.0) {
                    return domain("the logarithmic example needs 0 < T < 1");
                }
                if !(*q > 1.0) {
                    return domain("q must exceed 1");
                }
                Ok(())
            }
            SingularPart::GaussianProfileWeighted { profile, q, horizon } => {
                profile.validate()?;
                if !(*horizon > 0.0 && *q > 1.0) {
                    return domain("need T > 0 and q > 1");
                }
                Ok(())
            }
        }
    }

    /// `|b1|` sampled on forward time.
    pub fn b1_field(&self, grid: &Grid1d, times: &[f64], horizon: f64) -> Result<SpaceTimeField> {
        SpaceTimeField::from_fn(times.to_vec(), *grid, horizon, |t, x| self.b1.eval(t, x))
    }

    /// `I_T b1` sampled directly from the reversed formula, so no symmetric
    /// grid is needed and the singular slice sits at `t -> 0`.
    pub fn reversed_b1_field(
        &self,
        grid: &Grid1d,
        times: &[f64],
        horizon: f64,
    ) -> Result<SpaceTimeField> {
        SpaceTimeField::from_fn(times.to_vec(), *grid, horizon, |t, x| {
            self.b1.eval_reversed(horizon, t, x)
        })
    }

    /// `sup_t t^{1/q} ||I_T b1(t)||_p` on a log-spaced time grid.
    pub fn reversed_weighted_norm(&self, grid: &Grid1d, exps: &ExponentPair) -> Result<f64> {
        let times = log_times(1e-12 * exps.horizon, exps.horizon, 8);
        weighted_norm(&self.reversed_b1_field(grid, &times, exps.horizon)?, exps)
    }

    /// Spatial mollification of `b1`; `b2` is left alone.
    pub fn mollified(&self, grid: &Grid1d, n: u32) -> Result<DriftSpec> {
        let spec = MollifierSpec::new(n);
        let b1 = match &self.b1 {
            SingularPart::Zero => SingularPart::Zero,
            SingularPart::Grid { field } => SingularPart::Grid {
                field: mollify(field, &spec)?,
            },
            other => {
                let (profile, q, horizon, log) = other.separable().unwrap();
                let sampled = grid.sample(|x| profile.eval(x));
                let p = Profile::Grid {
                    grid: *grid,
                    values: mollify_slice(grid, &sampled, &spec)?,
                };
                if log {
                    SingularPart::Example18 { profile: p, q, horizon }
                } else {
                    SingularPart::GaussianProfileWeighted { profile: p, q, horizon }
                }
            }
        };
        Ok(DriftSpec {
            b1,
            b2: self.b2.clone(),
            bound_b2: self.bound_b2,
        })
    }

    /// Multiplies `b1` by `c`.
    pub fn scale_singular(&self, c: f64) -> DriftSpec {
        let b1 = match &self.b1 {
            SingularPart::Zero => SingularPart::Zero,
            SingularPart::Grid { field } => SingularPart::Grid { field: field.scaled(c) },
            SingularPart::Example18 { profile, q, horizon } => SingularPart::Example18 {
                profile: profile.scaled(c),
                q: *q,
                horizon: *horizon,
            },
            SingularPart::GaussianProfileWeighted { profile, q, horizon } => {
                SingularPart::GaussianProfileWeighted {
                    profile: profile.scaled(c),
                    q: *q,
                    horizon: *horizon,
                }
            }
        };
        DriftSpec {
            b1,
            b2: self.b2.clone(),
            bound_b2: self.bound_b2,
        }
    }
}

/// The logarithmically damped example `(T-t)^{-1/q} |log(T-t)|^{-1} b(x)`
/// on the horizon of `exps` (which must be below one).
pub fn build_example_drift(base: Profile, exps: &ExponentPair) -> Result<DriftSpec> {
    base.validate()?;
    let d = DriftSpec::new(
        SingularPart::Example18 {
            profile: base,
            q: exps.q,
            horizon: exps.horizon,
        },
        BoundedPart::Zero,
    );
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_strictness() {
        let d = DriftSpec::new(
            SingularPart::Example18 {
                profile: Profile::gaussian(0.1, 0.5),
                q: 4.0,
                horizon: 0.5,
            },
            BoundedPart::IndicatorBump {
                a: -1.0,
                b: 1.0,
                height: 0.3,
            },
        );
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DriftSpec>(&s).unwrap(), d);
        assert!(serde_json::from_str::<DriftSpec>(r#"{"b1":{"kind":"zero"},"b2":{"kind":"zero"},"extra":1}"#).is_err());
        assert!(serde_json::from_str::<DriftSpec>(r#"{"b1":{"kind":"nope"},"b2":{"kind":"zero"}}"#).is_err());
    }

    #[test]
    fn bounded_part_respects_bound() {
        let parts = [
            BoundedPart::Constant { c: -0.5 },
            BoundedPart::IndicatorBump { a: 0.0, b: 1.0, height: 2.0 },
            BoundedPart::Grid {
                grid: Grid1d::symmetric(1.0, 0.5).unwrap(),
                values: vec![0.1, -0.7, 0.2, 0.0, 0.3],
            },
        ];
        for b in parts {
            for k in -50..50 {
                assert!(b.eval(k as f64 * 0.07).abs() <= b.bound());
            }
        }
        assert!(BoundedPart::Linear { rate: 1.0 }.bound().is_infinite());
    }

    #[test]
    fn example_needs_short_horizon() {
        let e = ExponentPair::new(2.0, 4.0, 1, 1.0).unwrap();
        assert!(build_example_drift(Profile::gaussian(1.0, 1.0), &e).is_err());
        let e = e.with_horizon(0.5);
        assert!(build_example_drift(Profile::gaussian(1.0, 0.0), &e).is_err());
        let d = build_example_drift(Profile::gaussian(1.0, 1.0), &e).unwrap();
        assert!(d.singular_at_horizon());
        assert!(d.eval(0.5, 0.0).is_infinite());
        // (1/4)^{-1/4} / ln 4 at t = 1/4
        let want = 0.25f64.powf(-0.25) / 4f64.ln();
        assert!((d.eval(0.25, 0.0) - want).abs() < 1e-14);
    }
}
