//! A field bounded in `L^inf(0,1;L^2)` whose mollifications do not converge
//! uniformly in time: slice `k` lives on `[(k-1)/k, k/(k+1))` and is a bump
//! of height `k` on `[k, k + 1/k^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::grid::Grid1d;
use crate::mollifier::{mollify_slice, MollifierSpec};

/// Default grid for a given `k_max`: `[0, k_max + 2]` with four cells
/// across the thinnest bump.
pub fn default_grid(k_max: u32) -> Result<Grid1d> {
    let k = k_max as f64;
    let h = 1.0 / (4.0 * k * k);
    let len = k + 2.0;
    Grid1d::new(0.0, h, (len / h).round() as usize + 1)
}

/// One time slice per `k`, placed at the midpoint of its interval.
///
/// Bump widths are snapped to whole grid cells and the height is chosen so
/// that every slice has unit trapezoid `L^2` norm.
pub fn counterexample_field(grid: &Grid1d, k_max: u32) -> Result<SpaceTimeField> {
    if k_max == 0 {
        return Err(Error::Domain("k_max must be positive".into()));
    }
    let kf = k_max as f64;
    if grid.x_max() < kf + 1.0 || grid.x_min > 1.0 {
        return Err(Error::Resolution(format!(
            "grid must cover [1, {}]",
            k_max + 1
        )));
    }
    if grid.h > 1.0 / (4.0 * kf * kf) * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!(
            "spacing {} cannot resolve the bump of width 1/{}",
            grid.h,
            k_max * k_max
        )));
    }
    let mut times = Vec::with_capacity(k_max as usize);
    let mut values = Vec::with_capacity(k_max as usize * grid.n);
    for k in 1..=k_max {
        let kk = k as f64;
        times.push(0.5 * ((kk - 1.0) / kk + kk / (kk + 1.0)));
        let start = ((kk - grid.x_min) / grid.h).round() as usize;
        let cells = ((1.0 / (kk * kk)) / grid.h).round().max(1.0) as usize;
        // closed support of `cells + 1` points; the trapezoid then integrates
        // the square of a height-H plateau as H^2 * cells * h
        let height = 1.0 / (cells as f64 * grid.h).sqrt();
        let mut slice = vec![0.0; grid.n];
        for v in &mut slice[start..=start + cells] {
            *v = height;
        }
        // the two end points carry half weight; restore unit norm exactly
        let norm = grid.lp_norm(&slice, 2.0);
        slice.iter_mut().for_each(|v| *v /= norm);
        values.extend(slice);
    }
    SpaceTimeField::new(times, *grid, 1.0, 1, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub n: u32,
    /// `k` at which the largest gap is attained.
    pub k_star: u32,
    /// `sup_t ||f_n(t) - f(t)||_2^2`.
    pub sup_gap_sq: f64,
}

/// For each mollifier scale, the worst slice-wise squared `L^2` error.
pub fn lower_bound_table(field: &SpaceTimeField, n_list: &[u32]) -> Result<Vec<LowerBoundRow>> {
    let g = field.grid;
    n_list
        .iter()
        .map(|&n| {
            let spec = MollifierSpec::new(n);
            let mut best = (0u32, 0.0f64);
            for i in 0..field.n_times() {
                let s = field.slice(i);
                let m = mollify_slice(&g, s, &spec)?;
                let diff: Vec<f64> = m.iter().zip(s).map(|(a, b)| a - b).collect();
                let gap = g.lp_norm(&diff, 2.0).powi(2);
                if gap > best.1 {
                    best = (i as u32 + 1, gap);
                }
            }
            Ok(LowerBoundRow {
                n,
                k_star: best.0,
                sup_gap_sq: best.1,
            })
        })
        .collect()
}
