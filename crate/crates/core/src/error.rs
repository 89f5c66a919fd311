use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value at stage {stage}: {what}")]
    NonFinite { stage: usize, what: String },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error(
        "banned bin set is not conjugate-symmetric: component {component}, bin {bin} banned but bin {partner} is not"
    )]
    AsymmetricBins {
        component: usize,
        bin: usize,
        partner: usize,
    },

    #[error("point is not in the admissible set (distance {distance:.3e}): {context}")]
    NotInSet { context: String, distance: f64 },

    #[error("operation `{op}` is not supported for {variant}")]
    Unsupported { op: &'static str, variant: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations: {reason}")]
    NotConverged { iterations: usize, reason: String },

    #[error("model consistency: {0}")]
    ModelConsistency(String),

    #[error("precondition failed at stage {stage}: {what}")]
    Precondition { stage: usize, what: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            got,
        }
    }
}
