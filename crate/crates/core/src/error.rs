use thiserror::Error;

/// Errors raised by the geometry, forward and inverse layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RftError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("five-bar configuration outside workspace (phi1={phi1}, phi2={phi2})")]
    Workspace { phi1: f64, phi2: f64 },

    #[error("singular Jacobian at phi1={phi1}, phi2={phi2} (condition number {condition:e})")]
    SingularJacobian {
        phi1: f64,
        phi2: f64,
        condition: f64,
    },

    #[error("covariance not positive definite after jitter up to {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("degenerate least-squares fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, RftError>;
