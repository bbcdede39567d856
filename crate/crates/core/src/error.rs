use thiserror::Error;

/// Errors raised by the numerical routines and file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has a non-finite entry")]
    NonFinite,

    #[error("matrix is not Hermitian: max |x - x*| = {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("matrix is not positive definite: min eigenvalue {min_eigenvalue:e} <= threshold {threshold:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, threshold: f64 },

    #[error("Hermitian eigen-solver did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("function undefined on eigenvalue {eigenvalue:e}")]
    Domain { eigenvalue: f64 },

    #[error("congruence matrix is near-singular: sigma_min/sigma_max = {ratio:e}")]
    SingularCongruence { ratio: f64 },

    #[error("exponent p = {p} is not supported here (requires 1 < p < inf)")]
    UnsupportedExponent { p: f64 },

    #[error("parameter list is not strictly increasing at index {index}")]
    NonMonotoneParameter { index: usize },

    #[error("exponential set has not been verified as a Lie triple system")]
    NotLieTripleSystem,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed files or the file system rather
    /// than by the mathematics of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
