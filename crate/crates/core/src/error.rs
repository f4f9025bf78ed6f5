use thiserror::Error;

/// Errors raised by the calculus routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("index {index} lies outside the symbol's base dimension {dim}")]
    SupportExceedsDim { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature needs {points} nodes, budget is {budget} (set GAUSSWEYL_QUAD_MAX to raise it)")]
    QuadratureBudget { points: u128, budget: u64 },

    #[error("quadrature did not converge: last two orders differ by {delta:e}")]
    QuadratureNotConverged { delta: f64 },

    #[error("syntax error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    EigenNotConverged { sweeps: usize },

    #[error("frame is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
