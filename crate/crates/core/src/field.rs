//! Gridded space-time fields `f(t, x)` on `[0, T] x [-L, L]`, stored
//! time-major so every slice is contiguous.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exponents::ExponentPair;
use crate::grid::Grid1d;

const FORMAT_TAG: &str = "critdrift-field/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub times: Vec<f64>,
    pub grid: Grid1d,
    pub horizon: f64,
    pub components: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(
        times: Vec<f64>,
        grid: Grid1d,
        horizon: f64,
        components: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let f = Self {
            times,
            grid,
            horizon,
            components,
            values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(times: Vec<f64>, grid: Grid1d, horizon: f64) -> Result<Self> {
        let len = times.len() * grid.n;
        Self::new(times, grid, horizon, 1, vec![0.0; len])
    }

    pub fn from_fn(
        times: Vec<f64>,
        grid: Grid1d,
        horizon: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len() * grid.n);
        for &t in &times {
            values.extend((0..grid.n).map(|j| f(t, grid.x(j))));
        }
        Self::new(times, grid, horizon, 1, values)
    }

    /// Separable field `a(t) * profile(x)`.
    pub fn separable(
        times: Vec<f64>,
        grid: Grid1d,
        horizon: f64,
        time_factor: impl Fn(f64) -> f64,
        profile: &[f64],
    ) -> Result<Self> {
        if profile.len() != grid.n {
            return domain("profile length does not match grid");
        }
        let mut values = Vec::with_capacity(times.len() * grid.n);
        for &t in &times {
            let a = time_factor(t);
            values.extend(profile.iter().map(|&v| a * v));
        }
        Self::new(times, grid, horizon, 1, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return domain("field has an empty time grid");
        }
        if !(self.horizon > 0.0) {
            return domain("field horizon must be positive");
        }
        if self.components == 0 {
            return domain("field needs at least one component");
        }
        if self.times[0] < 0.0 || *self.times.last().unwrap() > self.horizon * (1.0 + 1e-12) {
            return domain("field times must lie in [0, T]");
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("field times must be strictly increasing");
        }
        if self.values.len() != self.times.len() * self.components * self.grid.n {
            return domain(format!(
                "value tensor has {} entries, expected {}",
                self.values.len(),
                self.times.len() * self.components * self.grid.n
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("field contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn is_vector(&self) -> bool {
        self.components > 1
    }

    pub fn radius(&self) -> f64 {
        self.grid.radius()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, ti: usize, c: usize) -> usize {
        (ti * self.components + c) * self.grid.n
    }

    /// First component of slice `ti`.
    pub fn slice(&self, ti: usize) -> &[f64] {
        self.component(ti, 0)
    }

    pub fn component(&self, ti: usize, c: usize) -> &[f64] {
        let o = self.offset(ti, c);
        &self.values[o..o + self.grid.n]
    }

    pub fn component_mut(&mut self, ti: usize, c: usize) -> &mut [f64] {
        let o = self.offset(ti, c);
        let n = self.grid.n;
        &mut self.values[o..o + n]
    }

    /// Pointwise Euclidean magnitude of slice `ti`.
    pub fn magnitude(&self, ti: usize) -> Vec<f64> {
        if self.components == 1 {
            return self.slice(ti).to_vec();
        }
        let mut out = vec![0.0; self.grid.n];
        for c in 0..self.components {
            for (o, v) in out.iter_mut().zip(self.component(ti, c)) {
                *o += v * v;
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        out
    }

    /// `L^p` norm of the slice at `ti` (Euclidean magnitude for vectors).
    pub fn slice_norm(&self, ti: usize, p: f64) -> f64 {
        if self.components == 1 {
            self.grid.lp_norm(self.slice(ti), p)
        } else {
            self.grid.lp_norm(&self.magnitude(ti), p)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_values(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map_values(f64::abs)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-14 * self.horizon)
            || !self.grid.same_as(&other.grid)
            || self.components != other.components
        {
            return domain("fields live on different grids");
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (o, b) in out.values.iter_mut().zip(&other.values) {
            *o = f(*o, *b);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Rebuild with new values of the same shape.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.times.clone(),
            self.grid,
            self.horizon,
            self.components,
            values,
        )
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Writes `<stem>.json` (header) and `<stem>.csv` (columns `t, x, value...`).
    pub fn write(
        &self,
        dir: &Path,
        stem: &str,
        exponents: Option<&ExponentPair>,
    ) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_name = format!("{stem}.csv");
        let header = FieldHeader {
            format: FORMAT_TAG.to_string(),
            csv: csv_name.clone(),
            times: self.times.clone(),
            grid: self.grid,
            radius: self.radius(),
            horizon: self.horizon,
            components: self.components,
            exponents: exponents.copied(),
        };
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&json_path, serde_json::to_string_pretty(&header)?)?;

        let csv_path = dir.join(&csv_name);
        let mut w = BufWriter::new(fs::File::create(&csv_path)?);
        write!(w, "t,x")?;
        if self.components == 1 {
            write!(w, ",value")?;
        } else {
            for c in 0..self.components {
                write!(w, ",value_{c}")?;
            }
        }
        writeln!(w)?;
        for (ti, &t) in self.times.iter().enumerate() {
            for j in 0..self.grid.n {
                write!(w, "{t},{}", self.grid.x(j))?;
                for c in 0..self.components {
                    write!(w, ",{}", self.component(ti, c)[j])?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok((json_path, csv_path))
    }

    /// Reads a field written by [`SpaceTimeField::write`]; returns the
    /// exponents stored in the header, if any.
    pub fn read(json_path: &Path) -> Result<(Self, Option<ExponentPair>)> {
        let header: FieldHeader = serde_json::from_str(&fs::read_to_string(json_path)?)?;
        if header.format != FORMAT_TAG {
            return Err(Error::Data(format!("unknown field format {}", header.format)));
        }
        let dir = json_path.parent().unwrap_or_else(|| Path::new("."));
        let reader = BufReader::new(fs::File::open(dir.join(&header.csv))?);
        let expected = header.times.len() * header.grid.n;
        let mut values = vec![0.0; expected * header.components];
        let mut rows = 0usize;
        for (lineno, line) in reader.lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if rows >= expected {
                return Err(Error::Data("field csv has more rows than the header".into()));
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 2 + header.components {
                return Err(Error::Data(format!("bad column count on line {}", lineno + 1)));
            }
            let (ti, j) = (rows / header.grid.n, rows % header.grid.n);
            for c in 0..header.components {
                let v: f64 = cols[2 + c]
                    .parse()
                    .map_err(|_| Error::Data(format!("bad number on line {}", lineno + 1)))?;
                values[(ti * header.components + c) * header.grid.n + j] = v;
            }
            rows += 1;
        }
        if rows != expected {
            return Err(Error::Data(format!("field csv has {rows} rows, expected {expected}")));
        }
        let field = Self::new(
            header.times,
            header.grid,
            header.horizon,
            header.components,
            values,
        )?;
        Ok((field, header.exponents))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldHeader {
    format: String,
    csv: String,
    times: Vec<f64>,
    grid: Grid1d,
    radius: f64,
    horizon: f64,
    components: usize,
    exponents: Option<ExponentPair>,
}

/// `n` equally spaced times on `[t0, t1]`, endpoints included.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Log-spaced times on `[t_min, t_max]` with the given density per decade.
pub fn log_times(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min);
    let decades = (t_max / t_min).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut out: Vec<f64> = (0..=n)
        .map(|k| (a + (b - a) * k as f64 / n as f64).exp())
        .collect();
    out[0] = t_min;
    out[n] = t_max;
    out
}

/// Grid symmetric under `t -> T - t`, built from gaps `tau` measured from
/// both ends. Gaps must lie in `(0, T/2]`.
pub fn symmetric_times(gaps: &[f64], horizon: f64) -> Vec<f64> {
    let mut left: Vec<f64> = gaps
        .iter()
        .copied()
        .filter(|&g| g > 0.0 && g < 0.5 * horizon)
        .collect();
    left.sort_by(f64::total_cmp);
    left.dedup();
    let mut out = left.clone();
    out.push(0.5 * horizon);
    out.extend(left.iter().rev().map(|g| horizon - g));
    out
}
