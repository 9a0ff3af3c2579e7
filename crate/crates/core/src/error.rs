use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: field has {got} values for grid {field_grid:#x}, grid {grid:#x} expects {expected}")]
    GridMismatch {
        grid: u64,
        field_grid: u64,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown canonical problem `{0}`")]
    UnknownProblem(String),

    #[error("condition {condition} fails: {detail}")]
    Condition { condition: &'static str, detail: String },

    #[error("{op} did not converge: {detail}")]
    NoConvergence { op: &'static str, detail: String },

    #[error("{op}: {detail}")]
    Degenerate { op: &'static str, detail: String },

    #[error("{op}: regime violated: {detail}")]
    Regime { op: &'static str, detail: String },

    #[error("config line {line}: {detail}")]
    Config { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn no_convergence(op: &'static str, detail: impl Into<String>) -> Self {
        Error::NoConvergence {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn degenerate(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Degenerate {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn regime(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Regime {
            op,
            detail: detail.into(),
        }
    }
}
