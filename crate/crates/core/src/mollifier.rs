//! Spatial mollification `f_n(t) = f(t) * rho_n`, `rho_n(x) = n rho(n x)`.

use serde::{Deserialize, Serialize};

use crate::convolution::{convolve, CenteredKernel};
use crate::error::{Error, Result};
use crate::exponents::ExponentPair;
use crate::field::SpaceTimeField;
use crate::grid::Grid1d;
use crate::spaces::weighted_norm;

/// `1 / int_{-1}^{1} exp(-1/(1-x^2)) dx`.
pub const BUMP_NORMALIZATION: f64 = 2.252_283_621_043_581_010_499_781_255_559_830_730_074;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// `c exp(-1/(1-|x|^2))` on the open unit ball.
    #[default]
    Bump,
}

impl MollifierProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MollifierProfile::Bump => {
                let r2 = x * x;
                if r2 >= 1.0 {
                    0.0
                } else {
                    BUMP_NORMALIZATION * (-1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierSpec {
    pub n: u32,
    #[serde(default)]
    pub profile: MollifierProfile,
}

impl MollifierSpec {
    pub fn new(n: u32) -> Self {
        Self {
            n,
            profile: MollifierProfile::Bump,
        }
    }

    /// Discrete weights `h rho_n(m h)`, rescaled to sum to exactly one so
    /// that grid mass is preserved.
    pub fn kernel(&self, h: f64) -> Result<CenteredKernel> {
        if self.n == 0 {
            return Err(Error::Domain("mollifier scale must be positive".into()));
        }
        let width = 1.0 / self.n as f64;
        if width < 2.0 * h {
            return Err(Error::Resolution(format!(
                "mollifier radius 1/{} is below two grid cells (h = {h})",
                self.n
            )));
        }
        let half = (width / h).floor() as usize;
        let n = self.n as f64;
        let mut k = CenteredKernel::from_fn(half, |m| h * n * self.profile.eval(n * m as f64 * h));
        let s = k.sum();
        k.taps.iter_mut().for_each(|v| *v /= s);
        Ok(k)
    }
}

pub fn mollify_slice(grid: &Grid1d, slice: &[f64], moll: &MollifierSpec) -> Result<Vec<f64>> {
    Ok(convolve(slice, &moll.kernel(grid.h)?))
}

pub fn mollify(field: &SpaceTimeField, moll: &MollifierSpec) -> Result<SpaceTimeField> {
    let kernel = moll.kernel(field.grid.h)?;
    let mut values = Vec::with_capacity(field.values().len());
    for i in 0..field.n_times() {
        for c in 0..field.components {
            values.extend(convolve(field.component(i, c), &kernel));
        }
    }
    field.with_values(values)
}

/// `(n, sup_t t^{1/q} ||f_n(t) - f(t)||_p)` for each scale.
pub fn mollification_profile(
    field: &SpaceTimeField,
    n_list: &[u32],
    exps: &ExponentPair,
) -> Result<Vec<(u32, f64)>> {
    n_list
        .iter()
        .map(|&n| {
            let fn_ = mollify(field, &MollifierSpec::new(n))?;
            Ok((n, weighted_norm(&fn_.sub(field)?, exps)?))
        })
        .collect()
}
