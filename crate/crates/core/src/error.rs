use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
