use thiserror::Error;

/// Errors raised across the library.
///
/// Variants are grouped by what a caller can do about them: bad inputs
/// (`InvalidInput`, `DimensionMismatch`), numerical breakdowns
/// (`Numerical`, `NotPositiveDefinite`, `NonConvergence`) and sampling
/// failures (`Sampling`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not positive semi-definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_value}, best point {best_point:?})")]
    NonConvergence {
        iterations: usize,
        best_value: f64,
        best_point: Vec<f64>,
    },

    #[error("sampling failure: {0}")]
    Sampling(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
