use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix not positive definite (last jitter {jitter:e}, condition estimate {condition_estimate:e})")]
    NotPositiveDefinite { jitter: f64, condition_estimate: f64 },

    #[error("observations {first} and {second} are closer than the minimum separation")]
    DuplicateLocation { first: usize, second: usize },

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("pivot variance is zero; cannot condition on a deterministic pivot")]
    DegeneratePivot,

    #[error("z1 sampler rejected {rejected} of {attempts} draws; fall back to the offset-degeneracy policy")]
    ExcessiveRejection { rejected: usize, attempts: usize },

    #[error("likelihood returned a non-finite value at {theta:?} after {attempts} attempts")]
    NonFiniteLikelihood { theta: Vec<f64>, attempts: usize },

    #[error("budget of {budget} evaluations exhausted")]
    BudgetExhausted { budget: usize },

    #[error("both evidence means are non-positive")]
    NonPositiveEvidence,

    #[error("bridge sampling diverged at iteration {iteration}; trace {trace:?}")]
    BridgeDiverged { iteration: usize, trace: Vec<f64> },

    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
