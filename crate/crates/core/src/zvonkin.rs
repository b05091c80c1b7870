//! One-dimensional Zvonkin transform for `dX = b dt + sigma(X) dW`.
//!
//! With `Phi(x) = int_0^x dy / sigma(y)`, the process `Y = Phi(X)` has unit
//! noise and drift `b(t, Psi(y)) / sigma(Psi(y)) - sigma'(Psi(y)) / 2`, where
//! `Psi` is the inverse of `Phi`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drift::{Drift, DriftSpec};
use crate::error::{Error, Result};
use crate::exponents::ExponentPair;
use crate::field::log_times;
use crate::grid::Grid1d;
use crate::heat::KernelConstants;
use crate::rng::derive_seed;
use crate::sde::{simulate, Diffusion, PathEnsemble, SimConfig};
use crate::stats::ks_distance;

/// Diffusion coefficient catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    Constant { c: f64 },
    /// `clamp(a + slope * x, lo, hi)`.
    AffineBounded { a: f64, slope: f64, lo: f64, hi: f64 },
    /// `base + amp * tanh(scale * x)`.
    Tanh { base: f64, amp: f64, scale: f64 },
    /// Linear interpolation, constant extension beyond the table.
    Grid { grid: Grid1d, values: Vec<f64> },
}

/// `sigma' = s1 + s2` with `s1` small in `L^p` and `s2` bounded. Every
/// catalog family has a bounded derivative, so `s1` is zero here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPrimeSplit {
    pub small_lp_norm: f64,
    pub bounded_sup: f64,
}

impl SigmaSpec {
    pub fn tanh_default() -> Self {
        SigmaSpec::Tanh {
            base: 2.0,
            amp: 1.0,
            scale: 1.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SigmaSpec::Constant { c } => *c,
            SigmaSpec::AffineBounded { a, slope, lo, hi } => (a + slope * x).clamp(*lo, *hi),
            SigmaSpec::Tanh { base, amp, scale } => base + amp * (scale * x).tanh(),
            SigmaSpec::Grid { grid, values } => grid.interpolate(values, x.clamp(grid.x_min, grid.x_max())),
        }
    }

    /// Derivative; grid families use centred differences with one-sided ends.
    pub fn derivative(&self) -> Result<SigmaPrime<'_>> {
        match self {
            SigmaSpec::Grid { grid, values } => {
                if grid.n < 3 {
                    return Err(Error::Specification(
                        "sigma' needs at least three grid samples".into(),
                    ));
                }
                Ok(SigmaPrime {
                    sigma: self,
                    table: Some(grid.derivative(values)),
                })
            }
            _ => Ok(SigmaPrime { sigma: self, table: None }),
        }
    }

    /// `(delta1, delta2)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            SigmaSpec::Constant { c } => (*c, *c),
            SigmaSpec::AffineBounded { lo, hi, .. } => (*lo, *hi),
            SigmaSpec::Tanh { base, amp, .. } => (base - amp.abs(), base + amp.abs()),
            SigmaSpec::Grid { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d1, d2) = self.bounds();
        if let SigmaSpec::AffineBounded { lo, hi, .. } = self {
            if lo > hi {
                return Err(Error::Specification(format!("affine clamp has lo {lo} > hi {hi}")));
            }
        }
        if !(d1 > 0.0) || !d2.is_finite() {
            return Err(Error::Ellipticity(format!(
                "sigma must satisfy 0 < delta1 <= sigma <= delta2 < inf, got [{d1}, {d2}]"
            )));
        }
        Ok(())
    }

    pub fn prime_split(&self) -> Result<SigmaPrimeSplit> {
        let bounded_sup = match self {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::AffineBounded { slope, lo, hi, .. } => {
                if lo < hi {
                    slope.abs()
                } else {
                    0.0
                }
            }
            SigmaSpec::Tanh { amp, scale, .. } => (amp * scale).abs(),
            SigmaSpec::Grid { .. } => {
                let p = self.derivative()?;
                p.table.unwrap().iter().fold(0.0, |m: f64, v| m.max(v.abs()))
            }
        };
        Ok(SigmaPrimeSplit {
            small_lp_norm: 0.0,
            bounded_sup,
        })
    }
}

pub struct SigmaPrime<'a> {
    sigma: &'a SigmaSpec,
    table: Option<Vec<f64>>,
}

impl SigmaPrime<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        match self.sigma {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::AffineBounded { a, slope, lo, hi } => {
                let v = a + slope * x;
                if v > *lo && v < *hi {
                    *slope
                } else {
                    0.0
                }
            }
            SigmaSpec::Tanh { amp, scale, .. } => {
                let c = (scale * x).cosh();
                amp * scale / (c * c)
            }
            SigmaSpec::Grid { grid, .. } => {
                let t = self.table.as_ref().unwrap();
                if x < grid.x_min || x > grid.x_max() {
                    0.0
                } else {
                    grid.interpolate(t, x)
                }
            }
        }
    }
}

/// Tables for `Phi` and `Psi` with cubic Hermite interpolation (slopes are
/// known exactly: `Phi' = 1/sigma`, `Psi' = sigma(Psi)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZvonkinMap {
    pub grid: Grid1d,
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    /// `Psi'` at the nodes `phi[j]`.
    pub psi_prime: Vec<f64>,
    pub delta1: f64,
    pub delta2: f64,
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// Default table resolution.
pub const DEFAULT_RESOLUTION: usize = 1 << 14;

/// Working interval `[x0 - w, x0 + w]` with `w = 8 sqrt(T) delta2 + |b2| T`.
pub fn working_interval(x0: f64, horizon: f64, delta2: f64, drift_bound: f64) -> (f64, f64) {
    let mut w = 8.0 * horizon.sqrt() * delta2;
    if drift_bound.is_finite() {
        w += drift_bound * horizon;
    }
    (x0 - w, x0 + w)
}

/// Cumulative trapezoid of `1/sigma` (with the endpoint derivative
/// correction), normalised so that `Phi(0) = 0`.
pub fn build_phi(sigma: &SigmaSpec, interval: (f64, f64), resolution: usize) -> Result<ZvonkinMap> {
    sigma.validate()?;
    let (a, b) = interval;
    if !(b > a) || resolution < 8 {
        return Err(Error::Domain(format!("bad interval [{a}, {b}] or resolution {resolution}")));
    }
    let grid = Grid1d::new(a, (b - a) / resolution as f64, resolution + 1)?;
    let sp = sigma.derivative()?;
    let s: Vec<f64> = grid.sample(|x| sigma.eval(x));
    if let Some(j) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Ellipticity(format!("sigma({}) = {} is not positive", grid.x(j), s[j])));
    }
    let inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    // (1/sigma)' = -sigma'/sigma^2
    let dinv: Vec<f64> = grid.points().iter().zip(&s).map(|(&x, &v)| -sp.eval(x) / (v * v)).collect();
    let h = grid.h;
    let mut phi = vec![0.0; grid.n];
    for j in 1..grid.n {
        phi[j] = phi[j - 1] + 0.5 * h * (inv[j - 1] + inv[j]) - h * h / 12.0 * (dinv[j] - dinv[j - 1]);
    }
    let (d1, d2) = sigma.bounds();
    let mut map = ZvonkinMap {
        grid,
        phi,
        phi_prime: inv,
        psi_prime: s,
        delta1: d1,
        delta2: d2,
    };
    if a <= 0.0 && b >= 0.0 {
        let z = map.phi(0.0);
        map.phi.iter_mut().for_each(|v| *v -= z);
    } else {
        // integrate from 0 to the left end with a fine Simpson rule
        let m = 4096;
        let hh = a / m as f64;
        let f = |x: f64| 1.0 / sigma.eval(x);
        let mut acc = f(0.0) + f(a);
        for k in 1..m {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * hh);
        }
        let left = acc * hh / 3.0;
        map.phi.iter_mut().for_each(|v| *v += left);
    }
    if map.phi.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Ellipticity("Phi is not strictly increasing".into()));
    }
    Ok(map)
}

impl ZvonkinMap {
    pub fn range(&self) -> (f64, f64) {
        (self.phi[0], self.phi[self.phi.len() - 1])
    }

    /// `Phi(x)`; NaN outside the table.
    pub fn phi(&self, x: f64) -> f64 {
        let g = &self.grid;
        let s = (x - g.x_min) / g.h;
        if !(s >= 0.0) || s > (g.n - 1) as f64 {
            return f64::NAN;
        }
        let j = (s.floor() as usize).min(g.n - 2);
        hermite(
            g.x(j),
            g.x(j + 1),
            self.phi[j],
            self.phi[j + 1],
            self.phi_prime[j],
            self.phi_prime[j + 1],
            x,
        )
    }

    /// `Psi(y)`; NaN outside the table.
    pub fn psi(&self, y: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(y >= lo && y <= hi) {
            return f64::NAN;
        }
        let j = self.phi.partition_point(|&v| v <= y).clamp(1, self.phi.len() - 1) - 1;
        hermite(
            self.phi[j],
            self.phi[j + 1],
            self.grid.x(j),
            self.grid.x(j + 1),
            self.psi_prime[j],
            self.psi_prime[j + 1],
            y,
        )
    }

    /// Largest `|Psi(Phi(x)) - x|` over cell midpoints and nodes.
    pub fn roundtrip_error(&self) -> f64 {
        let g = &self.grid;
        (0..2 * g.n - 1)
            .map(|k| {
                let x = g.x_min + 0.5 * k as f64 * g.h;
                (self.psi(self.phi(x)) - x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Bi-Lipschitz sandwich over all node pairs. For an increasing table
    /// every secant slope is a weighted mean of adjacent ones, so checking
    /// neighbours covers every pair.
    pub fn bilipschitz(&self) -> BiLipschitzReport {
        let h = self.grid.h;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for w in self.phi.windows(2) {
            let s = (w[1] - w[0]) / h;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        // differences of table entries carry roundoff of order |Phi| eps / h
        let scale = self.phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = 16.0 * f64::EPSILON * scale.max(1.0) / h;
        BiLipschitzReport {
            min_slope: lo,
            max_slope: hi,
            lower: 1.0 / self.delta2,
            upper: 1.0 / self.delta1,
            tolerance: tol,
            holds: lo >= 1.0 / self.delta2 - tol && hi <= 1.0 / self.delta1 + tol,
        }
    }

    /// Two-column `x,phi` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "x,phi")?;
        for (j, v) in self.phi.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.x(j), v)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiLipschitzReport {
    pub min_slope: f64,
    pub max_slope: f64,
    pub lower: f64,
    pub upper: f64,
    /// Absolute slack on the slopes for rounding in the table.
    pub tolerance: f64,
    pub holds: bool,
}

/// Drift of the `Y` equation. NaN outside the map's range, which makes the
/// simulator flag paths leaving the working interval.
pub struct TransformedDrift<'a> {
    pub b: &'a DriftSpec,
    pub sigma: &'a SigmaSpec,
    pub map: &'a ZvonkinMap,
    prime: SigmaPrime<'a>,
}

impl Drift for TransformedDrift<'_> {
    fn eval(&self, t: f64, y: f64) -> f64 {
        let x = self.map.psi(y);
        if x.is_nan() {
            return f64::NAN;
        }
        self.b.eval(t, x) / self.sigma.eval(x) - 0.5 * self.prime.eval(x)
    }

    fn singular_at_horizon(&self) -> bool {
        self.b.singular_at_horizon()
    }
}

pub fn transformed_drift<'a>(
    b: &'a DriftSpec,
    sigma: &'a SigmaSpec,
    map: &'a ZvonkinMap,
) -> Result<TransformedDrift<'a>> {
    let prime = sigma.derivative()?;
    Ok(TransformedDrift { b, sigma, map, prime })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedNormReport {
    /// Reversed weighted norm of `b1(t, Psi(y)) / sigma(Psi(y))`.
    pub singular_norm: f64,
    /// `T^{1/q} ||s1(Psi)||_p / 2`.
    pub sigma_part: f64,
    pub total: f64,
    /// `1 / (2 C0)`.
    pub threshold: f64,
    pub below_threshold: bool,
}

/// Weighted size of the singular part of the `Y` drift over the map range.
/// Only a flag: the smallness needed on the `sigma'` part is not quantified.
pub fn transformed_singular_norm(
    td: &TransformedDrift<'_>,
    exps: &ExponentPair,
    constants: &KernelConstants,
    points: usize,
) -> Result<TransformedNormReport> {
    let (lo, hi) = td.map.range();
    let ygrid = Grid1d::new(lo, (hi - lo) / (points - 1) as f64, points)?;
    let times = log_times(1e-12 * exps.horizon, exps.horizon, 8);
    let fld = crate::field::SpaceTimeField::from_fn(times, ygrid, exps.horizon, |t, y| {
        let x = td.map.psi(y);
        if x.is_nan() {
            0.0
        } else {
            td.b.b1.eval_reversed(exps.horizon, t, x) / td.sigma.eval(x)
        }
    })?;
    let singular_norm = crate::spaces::weighted_norm(&fld, exps)?;
    let split = td.sigma.prime_split()?;
    let sigma_part = 0.5 * exps.horizon.powf(1.0 / exps.q) * split.small_lp_norm * td.map.delta1.powf(-1.0 / exps.p);
    let total = singular_norm + sigma_part;
    let threshold = constants.transform_threshold();
    Ok(TransformedNormReport {
        singular_norm,
        sigma_part,
        total,
        threshold,
        below_threshold: total < threshold,
    })
}

/// Route A simulates `X` directly; route B simulates `Y` with unit noise
/// and maps back through `Psi`. The routes use independent seeds.
pub fn simulate_both_routes(
    b: &DriftSpec,
    sigma: &SigmaSpec,
    map: &ZvonkinMap,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<(PathEnsemble, PathEnsemble)> {
    let a = simulate_route_a(b, sigma, map, horizon, cfg)?;
    let td = transformed_drift(b, sigma, map)?;
    let mut cb = *cfg;
    cb.seed = derive_seed(cfg.seed, 0x0000_726f_7574_6542);
    cb.x0 = map.phi(cfg.x0);
    if cb.x0.is_nan() {
        return Err(Error::Domain("x0 lies outside the map's table".into()));
    }
    let mut ens = simulate(&td, Diffusion::Unit, horizon, &cb)?;
    for v in ens.states.iter_mut() {
        *v = map.psi(*v);
    }
    ens.x0 = cfg.x0;
    Ok((a, ens))
}

/// Route A alone; paths leaving the table interval are excluded.
pub fn simulate_route_a(
    b: &DriftSpec,
    sigma: &SigmaSpec,
    map: &ZvonkinMap,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    let (lo, hi) = (map.grid.x_min, map.grid.x_max());
    let walled = WalledDrift { b, lo, hi };
    let s = |x: f64| sigma.eval(x);
    simulate(&walled, Diffusion::Field(&s), horizon, cfg)
}

struct WalledDrift<'a> {
    b: &'a DriftSpec,
    lo: f64,
    hi: f64,
}

impl Drift for WalledDrift<'_> {
    fn eval(&self, t: f64, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            f64::NAN
        } else {
            self.b.eval(t, x)
        }
    }

    fn singular_at_horizon(&self) -> bool {
        self.b.singular_at_horizon()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteComparison {
    pub n_steps: usize,
    pub n_paths: usize,
    pub ks_routes: f64,
    /// Self-distances of independent route-A pairs.
    pub calibration: Vec<f64>,
    /// Mean of the calibration distances.
    pub noise_floor: f64,
    pub ratio: f64,
    pub excluded_a: usize,
    pub excluded_b: usize,
    pub pass: bool,
}

/// KS distance between the routes against the self-distance of
/// `calibration_pairs` independent route-A pairs; pass when within 1.5x.
pub fn compare_routes(
    b: &DriftSpec,
    sigma: &SigmaSpec,
    map: &ZvonkinMap,
    horizon: f64,
    cfg: &SimConfig,
    calibration_pairs: usize,
) -> Result<RouteComparison> {
    let (ea, eb) = simulate_both_routes(b, sigma, map, horizon, cfg)?;
    let ks_routes = ks_distance(&ea.terminal(), &eb.terminal())?;
    let mut calibration = Vec::new();
    for k in 0..calibration_pairs.max(1) as u64 {
        let mut c1 = *cfg;
        c1.seed = derive_seed(cfg.seed, 0x6361_6c00 + 2 * k);
        let mut c2 = *cfg;
        c2.seed = derive_seed(cfg.seed, 0x6361_6c00 + 2 * k + 1);
        let x = simulate_route_a(b, sigma, map, horizon, &c1)?.terminal();
        let y = simulate_route_a(b, sigma, map, horizon, &c2)?.terminal();
        calibration.push(ks_distance(&x, &y)?);
    }
    let noise_floor = calibration.iter().sum::<f64>() / calibration.len() as f64;
    let ratio = ks_routes / noise_floor;
    Ok(RouteComparison {
        n_steps: cfg.n_steps,
        n_paths: cfg.n_paths,
        ks_routes,
        calibration,
        noise_floor,
        ratio,
        excluded_a: ea.excluded_count(),
        excluded_b: eb.excluded_count(),
        pass: ratio <= 1.5,
    })
}

/// Writes `(x, Phi(x))` next to a JSON report; returns both paths.
pub fn export(map: &ZvonkinMap, report: &impl Serialize, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}_phi.csv"));
    map.write_csv(&csv)?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_string_pretty(report)?)?;
    Ok(vec![csv, json])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_sigma() {
        let s = SigmaSpec::Tanh {
            base: 1.0,
            amp: 1.0,
            scale: 1.0,
        };
        assert!(matches!(build_phi(&s, (-1.0, 1.0), 64), Err(Error::Ellipticity(_))));
        let g = Grid1d::new(0.0, 1.0, 2).unwrap();
        let s = SigmaSpec::Grid {
            grid: g,
            values: vec![1.0, 2.0],
        };
        assert!(matches!(s.derivative(), Err(Error::Specification(_))));
    }

    #[test]
    fn interval_without_origin() {
        let s = SigmaSpec::tanh_default();
        let full = build_phi(&s, (-1.0, 4.0), 4096).unwrap();
        let right = build_phi(&s, (1.0, 4.0), 4096).unwrap();
        assert!((full.phi(2.0) - right.phi(2.0)).abs() < 1e-10);
    }
}
