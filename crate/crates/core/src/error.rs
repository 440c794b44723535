use thiserror::Error;

/// Errors raised by the solvers and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SzegoError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("truncation breach at t = {t}: tail fraction {tail:.3e} exceeds {limit:.1e}")]
    TruncationBreach { t: f64, tail: f64, limit: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("section size {n} exceeds mode count {modes}")]
    SectionTooLarge { n: usize, modes: usize },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("fixed-point iteration did not contract (factor {factor:.3e})")]
    NoContraction { factor: f64 },

    #[error("sigma-manifold check failed: {0}")]
    SigmaCheckFailed(String),

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("non-positive value in log fit at index {index}")]
    NonPositive { index: usize },

    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),

    #[error("root ordering violated: {0}")]
    OrderingViolated(String),

    #[error("inequality violated: {0}")]
    InequalityViolated(String),

    #[error("stationary search failed after {iterations} attempts")]
    SearchFailed { iterations: usize },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, SzegoError>;
