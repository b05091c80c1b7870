//! Uniform spatial grids on a truncated interval and the quadrature rules
//! used for slice norms.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniform grid `x_j = x_min + j h`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1d {
    pub x_min: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid1d {
    pub fn new(x_min: f64, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return domain(format!("grid spacing must be positive, got {h}"));
        }
        if n < 2 {
            return domain("grid needs at least two points");
        }
        if !x_min.is_finite() {
            return domain("grid origin must be finite");
        }
        Ok(Self { x_min, h, n })
    }

    /// Grid on `[-radius, radius]` with spacing closest to `h` that divides
    /// the interval evenly.
    pub fn symmetric(radius: f64, h: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return domain(format!("truncation radius must be positive, got {radius}"));
        }
        let cells = (2.0 * radius / h).round().max(1.0) as usize;
        Self::new(-radius, 2.0 * radius / cells as f64, cells + 1)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Half-width of the grid, the truncation radius `L` for symmetric grids.
    pub fn radius(&self) -> f64 {
        self.x_min.abs().max(self.x_max().abs())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|j| f(self.x(j))).collect()
    }

    pub fn same_as(&self, other: &Grid1d) -> bool {
        self.n == other.n
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (self.x_min - other.x_min).abs() <= 1e-9 * self.h
    }

    /// Trapezoid rule over the whole grid.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let n = values.len();
        let interior: f64 = values[1..n - 1].iter().sum();
        self.h * (interior + 0.5 * (values[0] + values[n - 1]))
    }

    /// Trapezoid `L^p` norm; `p = inf` gives the max norm.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        let n = values.len();
        let pow = |v: f64| {
            if p == 1.0 {
                v.abs()
            } else if p == 2.0 {
                v * v
            } else {
                v.abs().powf(p)
            }
        };
        let interior: f64 = values[1..n - 1].iter().map(|&v| pow(v)).sum();
        let integral = self.h * (interior + 0.5 * (pow(values[0]) + pow(values[n - 1])));
        if p == 1.0 {
            integral
        } else if p == 2.0 {
            integral.sqrt()
        } else {
            integral.powf(1.0 / p)
        }
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = (x - self.x_min) / self.h;
        if !(s >= 0.0) || s > (self.n - 1) as f64 {
            return 0.0;
        }
        let j = (s.floor() as usize).min(self.n - 2);
        let w = s - j as f64;
        values[j] * (1.0 - w) + values[j + 1] * w
    }

    /// Centered differences with one-sided ends.
    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut out = vec![0.0; n];
        out[0] = (values[1] - values[0]) / self.h;
        out[n - 1] = (values[n - 1] - values[n - 2]) / self.h;
        for j in 1..n - 1 {
            out[j] = (values[j + 1] - values[j - 1]) / (2.0 * self.h);
        }
        out
    }
}
