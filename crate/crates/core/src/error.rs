use thiserror::Error;

use crate::admm::AdmmTrace;

pub type Result<T, E = LordError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LordError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("refusing to materialize a {rows}x{cols} operator (cap is {cap} entries)")]
    TooLarge { rows: usize, cols: usize, cap: usize },

    #[error("unsupported operator: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("ADMM diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        trace: Box<AdmmTrace>,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl LordError {
    pub(crate) fn shape(
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    ) -> Self {
        LordError::Shape {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }
}
