//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    /// Input data contains NaN or infinite entries, is malformed, or is
    /// otherwise unusable.
    #[error("data error: {0}")]
    Data(String),

    /// A hyperparameter or argument is outside its admissible range.
    #[error("parameter error: {0}")]
    Param(String),

    /// A graph does not satisfy the contract required by the operation
    /// (e.g. rows must sum to 1).
    #[error("graph error: {0}")]
    Graph(String),

    /// An API contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric routine failed (singular system, non-finite result).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl std::fmt::Display, right: impl std::fmt::Display) -> Self {
        Error::Shape {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
