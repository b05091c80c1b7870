//! Terminal-law statistics: KS distance, Gaussian KDE, `L^r` density proxy
//! and a common-random-numbers probe of `x -> E f(X_t(x))`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::Grid1d;

/// Mean and standard error, summed in the given order.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (v / n as f64).sqrt())
}

/// Sample variance and its standard error (normal-theory free, from the
/// fourth central moment).
pub fn variance_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2) / n).max(0.0).sqrt())
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return domain("empty sample");
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Data("sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Grid1d,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Bandwidth {
    /// `1.06 sd n^{-1/5}`.
    #[default]
    Silverman,
    Fixed { h: f64 },
}

/// Points on the automatic KDE grid.
pub const KDE_POINTS: usize = 512;

/// Gaussian KDE on `[min - 4h, max + 4h]`.
pub fn kde(sample: &[f64], rule: Bandwidth) -> Result<DensityEstimate> {
    if sample.len() < 100 {
        return domain(format!("kde needs at least 100 samples, got {}", sample.len()));
    }
    // sorting first makes every sum independent of the input order
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let sd = {
        let m = s.iter().sum::<f64>() / n;
        (s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let h = match rule {
        Bandwidth::Silverman => 1.06 * sd * n.powf(-0.2),
        Bandwidth::Fixed { h } => h,
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Bandwidth(format!("degenerate bandwidth {h} (sample sd {sd})")));
    }
    let lo = s[0] - 4.0 * h;
    let hi = s[s.len() - 1] + 4.0 * h;
    let grid = Grid1d::new(lo, (hi - lo) / (KDE_POINTS - 1) as f64, KDE_POINTS)?;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let cut = 8.0 * h;
    let values = (0..grid.n)
        .map(|j| {
            let x = grid.x(j);
            let a = s.partition_point(|&v| v < x - cut);
            let b = s.partition_point(|&v| v <= x + cut);
            norm * s[a..b]
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityEstimate {
        grid,
        values,
        bandwidth: h,
        n_samples: s.len(),
    })
}

impl DensityEstimate {
    pub fn mass(&self) -> f64 {
        self.grid.trapezoid(&self.values)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrProxy {
    pub r: f64,
    /// `int |p|^r dy` on the full grid.
    pub value: f64,
    /// Same on every other grid point.
    pub coarse_value: f64,
    pub relative_change: f64,
    pub stable: bool,
}

/// `int |p|^r dy` with a refinement-stability flag (change at most 5%).
pub fn lr_norm_proxy(density: &DensityEstimate, r: f64) -> Result<LrProxy> {
    if !(r >= 1.0) {
        return domain(format!("r must be at least 1, got {r}"));
    }
    let pow: Vec<f64> = density.values.iter().map(|v| v.abs().powf(r)).collect();
    let value = density.grid.trapezoid(&pow);
    let g = density.grid;
    let m = (g.n - 1) / 2 + 1;
    let coarse_grid = Grid1d::new(g.x_min, 2.0 * g.h, m)?;
    let coarse: Vec<f64> = pow.iter().step_by(2).copied().take(m).collect();
    let coarse_value = coarse_grid.trapezoid(&coarse);
    let relative_change = if value > 0.0 {
        (value - coarse_value).abs() / value
    } else {
        0.0
    };
    Ok(LrProxy {
        r,
        value,
        coarse_value,
        relative_change,
        stable: value.is_finite() && relative_change <= 0.05,
    })
}

/// Bounded observables for the semigroup probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `1_{(-inf, a]}`.
    HalfLine { a: f64 },
    /// `1_{[a, b]}`.
    Interval { a: f64, b: f64 },
    /// `x`, accepted by the parser but refused by the probe.
    Identity,
}

impl Observable {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable::HalfLine { a } => (x <= *a) as u8 as f64,
            Observable::Interval { a, b } => (x >= *a && x <= *b) as u8 as f64,
            Observable::Identity => x,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Observable::Identity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FellerProbe {
    pub rows: Vec<ProbeRow>,
    /// Largest `|P f(x_{i+1}) - P f(x_i)|`.
    pub max_gap: f64,
    /// Standard error of that gap under the common noise.
    pub max_gap_se: f64,
}

/// Estimates `x -> E f(X_t(x))` on `x_list` with identical noise for every
/// starting point. `simulate_terminal(x)` must use a fixed seed.
pub fn feller_probe(
    f: &Observable,
    x_list: &[f64],
    mut simulate_terminal: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<FellerProbe> {
    if !f.is_bounded() {
        return domain("the probe needs a bounded test function");
    }
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(x_list.len());
    let mut rows = Vec::with_capacity(x_list.len());
    for &x in x_list {
        let v: Vec<f64> = simulate_terminal(x)?.into_iter().map(|y| f.eval(y)).collect();
        let (m, se) = mean_and_se(&v);
        rows.push(ProbeRow { x, estimate: m, stderr: se });
        values.push(v);
    }
    let mut max_gap = 0.0;
    let mut max_gap_se = 0.0;
    for w in values.windows(2) {
        if w[0].len() != w[1].len() {
            return Err(Error::Data("probe runs excluded different paths".into()));
        }
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        let (m, se) = mean_and_se(&d);
        if m.abs() >= max_gap {
            max_gap = m.abs();
            max_gap_se = se;
        }
    }
    Ok(FellerProbe {
        rows,
        max_gap,
        max_gap_se,
    })
}
