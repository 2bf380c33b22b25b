use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("non-finite gradient pushed at step {step}")]
    NonFiniteGradient { step: usize },

    #[error(
        "non-finite update at step {step}: coordinate {coordinate} reached magnitude {magnitude}"
    )]
    Divergence {
        step: usize,
        coordinate: usize,
        magnitude: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("symmetric eigensolver did not converge within {iterations} QL iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("dense reference limited to d <= {max}, got d = {d}; use the low-rank path")]
    DenseTooLarge { d: usize, max: usize },

    #[error("point is outside the problem domain: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Degenerate(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
