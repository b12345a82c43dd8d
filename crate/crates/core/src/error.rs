use thiserror::Error;

/// Errors produced by the model, oracle, estimator and sampler layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration does not satisfy the model's structural invariants
    /// (state range, symmetry, shape).
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// A vector or matrix does not have the dimension the model declares.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An exact computation was asked for an instance above its cost cap.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A parameter lies outside the prior support where the requested
    /// quantity is undefined.
    #[error("parameter outside prior support")]
    OutsideSupport,

    /// The precision estimate stayed rank-deficient after jitter repair.
    #[error("singular precision estimate")]
    SingularPrecision,

    /// A matrix expected to be symmetric positive definite is not.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The integrator hit a non-finite gradient; carries the failing step.
    #[error("numerical integration failed at step {step}")]
    IntegrationFailure { step: usize },

    /// A leapfrog path and its batches do not line up.
    #[error("path/batch mismatch: {0}")]
    PathMismatch(String),

    /// A stochastic-approximation iterate became non-finite.
    #[error("iterate became non-finite at step {step}")]
    NonFiniteIterate { step: usize },

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
