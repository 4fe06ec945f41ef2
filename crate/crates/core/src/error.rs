//! Error types shared across the crate.

use crate::continuation::ContinuationTrace;
use crate::param_space::HomotopyPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape error: {0}")]
    Shape(String),

    /// The two points defining a secant are closer than the degeneracy tolerance.
    #[error("degenerate secant: consecutive points coincide (joint distance {distance:.3e})")]
    DegenerateSecant { distance: f64 },

    #[error("numerical divergence: {context}")]
    NumericalDivergence { context: String },

    /// Corrector did not reach its convergence criteria. Carries the best
    /// iterate seen so the caller can retry with a smaller step.
    #[error("corrector failed to converge after {steps} steps (residual {residual:.3e})")]
    CorrectorFailed {
        best: Box<HomotopyPoint>,
        residual: f64,
        steps: usize,
    },

    /// Continuation could not advance past the given stage. Carries the
    /// partial trace up to the last accepted point.
    #[error("continuation stalled at stage {stage} (lambda_max {lambda_max:.4})")]
    ContinuationStalled {
        stage: usize,
        lambda_max: f64,
        trace: Box<ContinuationTrace>,
    },

    /// Step budget ran out before the continuation target was reached.
    #[error("continuation exceeded max_steps before reaching the target")]
    MaxStepsExceeded { trace: Box<ContinuationTrace> },

    #[error("singular augmented system in Newton corrector")]
    SingularSystem,

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Extracts the partial trace from stall/budget errors, if any.
    pub fn into_partial_trace(self) -> Option<ContinuationTrace> {
        match self {
            Error::ContinuationStalled { trace, .. } => Some(*trace),
            Error::MaxStepsExceeded { trace } => Some(*trace),
            _ => None,
        }
    }
}
