use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Tolerance on `2/q + d/p = 1`.
pub const CRITICALITY_TOL: f64 = 1e-12;

/// The exponent tuple `(p, q, d, T)` that fixes every weighted norm and
/// every solver constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
    pub d: u32,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl ExponentPair {
    pub fn new(p: f64, q: f64, d: u32, horizon: f64) -> Result<Self> {
        let e = Self { p, q, d, horizon };
        e.validate()?;
        Ok(e)
    }

    /// The critical pair for a given `q` and dimension: `p = d / (1 - 2/q)`.
    pub fn critical(q: f64, d: u32, horizon: f64) -> Result<Self> {
        if !(q > 2.0) {
            return domain(format!("critical p needs q > 2, got q = {q}"));
        }
        Self::new(d as f64 / (1.0 - 2.0 / q), q, d, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return domain(format!("p must be >= 1, got {}", self.p));
        }
        if !(self.q >= 1.0) {
            return domain(format!("q must be >= 1, got {}", self.q));
        }
        if self.d < 1 {
            return domain("dimension d must be >= 1");
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return domain(format!("horizon T must be positive, got {}", self.horizon));
        }
        Ok(())
    }

    pub fn criticality_gap(&self) -> f64 {
        2.0 / self.q + self.d as f64 / self.p - 1.0
    }

    pub fn is_critical(&self) -> bool {
        self.criticality_gap().abs() <= CRITICALITY_TOL
    }

    /// Hölder conjugate `p' = p / (p - 1)` (infinite for `p = 1`).
    pub fn conjugate_p(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Temporal weight `t^{1/q}`.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        t.powf(1.0 / self.q)
    }
}
