//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix contains NaN or infinite entries.
    #[error("non-finite entries in {context}")]
    NonFinite { context: &'static str },

    /// Operand shapes do not line up.
    #[error("dimension mismatch in {context}: {details}")]
    DimensionMismatch {
        context: &'static str,
        details: String,
    },

    /// A square matrix was required.
    #[error("{context}: expected a square matrix, got {rows}x{cols}")]
    NonSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },

    /// Invalid configuration or parameter value.
    #[error("config error: {0}")]
    Config(String),

    /// Iterative eigenvalue/SVD computation failed to converge.
    #[error("{algorithm} did not converge for a {dim}x{dim} matrix (Frobenius norm {norm:.3e})")]
    NonConvergence {
        algorithm: &'static str,
        dim: usize,
        norm: f64,
    },

    /// Gradient descent blew up.
    #[error("gradient descent diverged at step {step} (loss {loss:.3e})")]
    Divergence { step: usize, loss: f64 },

    /// The noisy-data Gram matrix is numerically singular.
    #[error(
        "data Gram matrix is numerically singular: smallest eigenvalue {smallest:.3e} \
         (largest {largest:.3e})"
    )]
    SingularData { smallest: f64, largest: f64 },

    /// Data carry no usable signal (e.g. all-zero snapshot matrix).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for config errors, 3 for numerical
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Json(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
