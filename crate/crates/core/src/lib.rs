//! Numerics for one-dimensional SDEs whose drift has a critical singular part.

// NaN-aware comparisons and 40-digit constants are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod convolution;
pub mod counterexample;
pub mod drift;
pub mod error;
pub mod experiment;
pub mod exponents;
pub mod field;
pub mod grid;
pub mod heat;
pub mod manifest;
pub mod mild;
pub mod mollifier;
pub mod plots;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod spaces;
pub mod special;
pub mod stats;
pub mod testfn;
pub mod zvonkin;

pub use error::{Error, Result};
pub use exponents::ExponentPair;
pub use field::SpaceTimeField;
pub use grid::Grid1d;
