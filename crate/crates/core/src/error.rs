use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("index {index} out of range for dataset of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{0} has no closed-form maximizer over the configured feasible set")]
    NoClosedFormMaximizer(&'static str),

    #[error("{0} has no closed-form generalization risk")]
    NoClosedFormGenRisk(&'static str),

    #[error("inner solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    InnerSolveFailed { residual: f64, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("step {iteration} failed: {source}")]
    StepFailed {
        iteration: usize,
        #[source]
        source: Box<LabError>,
    },

    #[error("datasets differ in more than one sample")]
    NotNeighbors,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LabError::DimensionMismatch { expected, got })
    }
}
