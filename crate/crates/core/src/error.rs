use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model domain error: {0}")]
    ModelDomain(String),

    #[error("singular mass metric at q = {q:?}")]
    SingularMetric { q: Vec<f64> },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("step {step} failed")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point {index} failed")]
    PointFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("modified conformal factor is not positive ({value:e}); step size outside the validity regime")]
    NonPositiveConformalFactor { value: f64 },

    #[error("taylor extraction unreliable: {0}")]
    ExtractionUnreliable(String),

    #[error("frank-wolfe membership test stalled after {iterations} iterations on sample {sample} (squared distance {distance:e})")]
    FrankWolfeStall {
        sample: u64,
        iterations: usize,
        distance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::StepFailed {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_point(self, index: usize) -> Error {
        Error::PointFailed {
            index,
            source: Box::new(self),
        }
    }
}
