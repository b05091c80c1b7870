//! C ABI over the `critdrift` library.
//!
//! Every fallible call returns a `CdStatus`; on failure the message is kept
//! per thread and can be fetched with `cd_last_error`. Objects cross the
//! boundary as opaque pointers and must be released with their `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use critdrift::drift::DriftSpec;
use critdrift::experiment::{run, ExperimentConfig};
use critdrift::heat::compute_constants;
use critdrift::mild::{solve_mild, MildOptions, MildSolution};
use critdrift::sde::{euler_maruyama, PathEnsemble, SimConfig};
use critdrift::spaces::weighted_norm;
use critdrift::{Error, ExponentPair, Grid1d, SpaceTimeField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Resolution = 4,
    SmallnessViolated = 5,
    NoConvergence = 6,
    ExcessiveExclusion = 7,
    Config = 8,
    Io = 9,
    Numerical = 10,
    Panic = 11,
}

impl From<&Error> for CdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) | Error::Ellipticity(_) | Error::Specification(_) => CdStatus::Domain,
            Error::Resolution(_) | Error::Truncation(_) => CdStatus::Resolution,
            Error::SmallnessViolated { .. } => CdStatus::SmallnessViolated,
            Error::NoConvergence { .. } => CdStatus::NoConvergence,
            Error::ExcessiveExclusion { .. } => CdStatus::ExcessiveExclusion,
            Error::Config(_) | Error::Json(_) => CdStatus::Config,
            Error::Io(_) | Error::Manifest(_) => CdStatus::Io,
            Error::Data(_) | Error::Fit(_) | Error::Bandwidth(_) => CdStatus::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: CdStatus, msg: impl Into<String>) -> CdStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CdStatus>) -> CdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CdStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CdStatus::Panic, msg)
        }
    }
}

fn lib<T>(r: critdrift::Result<T>) -> Result<T, CdStatus> {
    r.map_err(|e| fail(CdStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), CdStatus> {
    if p.is_null() {
        Err(fail(CdStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], CdStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, CdStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(CdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn exps(p: f64, q: f64, horizon: f64) -> Result<ExponentPair, CdStatus> {
    lib(ExponentPair::new(p, q, 1, horizon))
}

pub struct CdField(SpaceTimeField);
pub struct CdSolution(MildSolution);
pub struct CdDrift(DriftSpec);
pub struct CdEnsemble(PathEnsemble);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CdConstants {
    pub c_grad: f64,
    pub c_sup: f64,
    pub c0: f64,
    pub theta: f64,
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn cd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Kernel constants for exponents `(p, q)` in one dimension.
///
/// # Safety
/// `out` must point to a writable `CdConstants`.
#[no_mangle]
pub unsafe extern "C" fn cd_constants(p: f64, q: f64, horizon: f64, out: *mut CdConstants) -> CdStatus {
    guard(|| {
        non_null(out, "out")?;
        let k = lib(compute_constants(&exps(p, q, horizon)?))?;
        *out = CdConstants {
            c_grad: k.c_grad,
            c_sup: k.c_sup,
            c0: k.c0,
            theta: k.theta,
        };
        Ok(())
    })
}

/// Builds a scalar field from `n_times * nx` time-major values on the grid
/// `x_min + j h`.
///
/// # Safety
/// `times` must hold `n_times` values, `values` `n_times * nx`, `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_field_new(
    times: *const f64,
    n_times: usize,
    x_min: f64,
    h: f64,
    nx: usize,
    horizon: f64,
    values: *const f64,
    out: *mut *mut CdField,
) -> CdStatus {
    guard(|| {
        non_null(out, "out")?;
        let t = slice(times, n_times, "times")?.to_vec();
        let len = n_times
            .checked_mul(nx)
            .ok_or_else(|| fail(CdStatus::InvalidArgument, "field size overflows"))?;
        let v = slice(values, len, "values")?.to_vec();
        let grid = lib(Grid1d::new(x_min, h, nx))?;
        let f = lib(SpaceTimeField::new(t, grid, horizon, 1, v))?;
        *out = Box::into_raw(Box::new(CdField(f)));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or come from `cd_field_new`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cd_field_free(f: *mut CdField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `sup_t t^{1/q} ||f(t)||_p` over the grid times.
///
/// # Safety
/// `f` must be a live field and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cd_weighted_norm(f: *const CdField, p: f64, q: f64, out: *mut f64) -> CdStatus {
    guard(|| {
        non_null(f, "field")?;
        non_null(out, "out")?;
        let f = &(*f).0;
        *out = lib(weighted_norm(f, &exps(p, q, f.horizon)?))?;
        Ok(())
    })
}

/// Solves the backward heat problem with forcing `f` and optional transport
/// coefficient `g` (null for none), using default solver options.
///
/// # Safety
/// `f` must be a live field, `g` null or a live field, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cd_solve_mild(
    f: *const CdField,
    g: *const CdField,
    p: f64,
    q: f64,
    out: *mut *mut CdSolution,
) -> CdStatus {
    guard(|| {
        non_null(f, "forcing")?;
        non_null(out, "out")?;
        let f = &(*f).0;
        let g = g.as_ref().map(|g| &g.0);
        let sol = lib(solve_mild(f, g, &exps(p, q, f.horizon)?, &MildOptions::default()))?;
        *out = Box::into_raw(Box::new(CdSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or come from `cd_solve_mild`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cd_solution_free(s: *mut CdSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Sup norms of `u` and `du/dx`, Picard iterations and contraction ratio.
/// Any output pointer may be null.
///
/// # Safety
/// `s` must be a live solution; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cd_solution_summary(
    s: *const CdSolution,
    sup_u: *mut f64,
    sup_grad: *mut f64,
    iterations: *mut usize,
    contraction_ratio: *mut f64,
) -> CdStatus {
    guard(|| {
        non_null(s, "solution")?;
        let s = &(*s).0;
        if let Some(o) = sup_u.as_mut() {
            *o = s.sup_u();
        }
        if let Some(o) = sup_grad.as_mut() {
            *o = s.sup_grad();
        }
        if let Some(o) = iterations.as_mut() {
            *o = s.iterations;
        }
        if let Some(o) = contraction_ratio.as_mut() {
            *o = s.contraction_ratio;
        }
        Ok(())
    })
}

/// Copies the `nx` values of `u` (or of `du/dx` when `gradient` is true) at
/// solver time index `ti`. `*n_times` receives the number of solver times
/// when non-null.
///
/// # Safety
/// `s` must be a live solution and `buf` hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cd_solution_slice(
    s: *const CdSolution,
    ti: usize,
    gradient: bool,
    buf: *mut f64,
    len: usize,
    n_times: *mut usize,
) -> CdStatus {
    guard(|| {
        non_null(s, "solution")?;
        let s = &(*s).0;
        let field = if gradient { &s.grad_u } else { &s.u };
        if let Some(o) = n_times.as_mut() {
            *o = field.n_times();
        }
        if ti >= field.n_times() {
            return Err(fail(CdStatus::InvalidArgument, format!("time index {ti} out of range")));
        }
        let row = field.slice(ti);
        if len < row.len() {
            return Err(fail(CdStatus::InvalidArgument, format!("buffer needs {} values", row.len())));
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
        Ok(())
    })
}

/// Parses a drift from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cd_drift_from_json(json: *const c_char, out: *mut *mut CdDrift) -> CdStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = string(json, "json")?;
        let d: DriftSpec = lib(serde_json::from_str(&text).map_err(Error::from))?;
        lib(d.validate())?;
        *out = Box::into_raw(Box::new(CdDrift(d)));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or come from `cd_drift_from_json`.
#[no_mangle]
pub unsafe extern "C" fn cd_drift_free(d: *mut CdDrift) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Euler-Maruyama paths of `dX = b dt + dW` from `x0` on `[0, horizon]`.
///
/// # Safety
/// `d` must be a live drift and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cd_simulate(
    d: *const CdDrift,
    horizon: f64,
    x0: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    out: *mut *mut CdEnsemble,
) -> CdStatus {
    guard(|| {
        non_null(d, "drift")?;
        non_null(out, "out")?;
        let cfg = SimConfig::new(x0, n_paths, n_steps, seed);
        let ens = lib(euler_maruyama(&(*d).0, horizon, &cfg))?;
        *out = Box::into_raw(Box::new(CdEnsemble(ens)));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or come from `cd_simulate`.
#[no_mangle]
pub unsafe extern "C" fn cd_ensemble_free(e: *mut CdEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Terminal states of the retained paths. With `buf` null only `*count` is
/// written; otherwise up to `len` values are copied.
///
/// # Safety
/// `e` must be a live ensemble, `count` writable, `buf` null or `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cd_ensemble_terminal(
    e: *const CdEnsemble,
    buf: *mut f64,
    len: usize,
    count: *mut usize,
) -> CdStatus {
    guard(|| {
        non_null(e, "ensemble")?;
        non_null(count, "count")?;
        let term = (*e).0.terminal();
        *count = term.len();
        if !buf.is_null() {
            let n = term.len().min(len);
            ptr::copy_nonoverlapping(term.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// Runs an experiment from its JSON config, writing artifacts and the
/// manifest under `out_dir`. `*passed` tells whether every check held.
///
/// # Safety
/// Both strings must be NUL-terminated; `passed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cd_run_experiment(
    config_json: *const c_char,
    out_dir: *const c_char,
    passed: *mut bool,
) -> CdStatus {
    guard(|| {
        let cfg = lib(ExperimentConfig::parse(&string(config_json, "config")?))?;
        lib(cfg.validate())?;
        let dir = string(out_dir, "out_dir")?;
        let m = lib(run(&cfg, Path::new(&dir)))?;
        if let Some(o) = passed.as_mut() {
            *o = m.passed();
        }
        Ok(())
    })
}
