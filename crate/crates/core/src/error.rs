//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative routine hit its iteration cap. Carries the last residual
    /// so the caller can decide whether the partial answer is usable.
    #[error("{context} did not converge within {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerically rank-deficient matrix in {0}")]
    RankDeficient(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Finite and strictly positive; NaN and infinities fail.
pub(crate) fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Finite and nonnegative; NaN and infinities fail.
pub(crate) fn nonnegative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}
