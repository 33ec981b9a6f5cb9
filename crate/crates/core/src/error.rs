use thiserror::Error;

/// Errors raised by the laboratory. A failed hypothesis or a diverging
/// iteration is a verdict, not an error; the variants here are reserved for
/// inputs that cannot be evaluated at all.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),

    #[error("unsupported hypothesis: {0}")]
    UnsupportedHypothesis(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid evaluation: {0}")]
    InvalidEvaluation(String),

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("iteration diverged at x with norm {norm}: {reason}")]
    Diverged { norm: f64, reason: String },

    #[error("rejected config `{experiment}`: field `{field}`: {reason}")]
    RejectedConfig {
        experiment: String,
        field: String,
        reason: String,
    },
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

impl LabError {
    pub(crate) fn rejected(experiment: &str, field: &str, reason: impl Into<String>) -> Self {
        LabError::RejectedConfig {
            experiment: experiment.to_string(),
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
