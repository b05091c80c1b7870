use thiserror::Error;

/// Errors raised across the library. Variants map onto the failure classes
/// the operations distinguish (bad data, bad domain, unresolvable grids, ...).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error(
        "smallness violated: weighted norm {norm:.6e} not below threshold {threshold:.6e} \
         (contraction ratio {ratio:.4})"
    )]
    SmallnessViolated {
        norm: f64,
        threshold: f64,
        ratio: f64,
    },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ellipticity error: {0}")]
    Ellipticity(String),

    #[error("specification error: {0}")]
    Specification(String),

    #[error("{excluded} of {total} paths excluded for non-finite drift (limit 1%)")]
    ExcessiveExclusion { excluded: usize, total: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("bandwidth error: {0}")]
    Bandwidth(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
