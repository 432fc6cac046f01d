use thiserror::Error;

/// Errors produced by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("index {index} is beyond the materialized horizon {horizon} and no extension rule is available")]
    Horizon { index: u64, horizon: u64 },

    #[error("minimizer reached the truncation boundary at p = {0}; increase the horizon")]
    Truncation(u64),

    #[error("ordering 0 <= a_1 < b_1 < a_2 < ... violated at j = {j}: {detail}")]
    Ordering { j: u64, detail: String },

    #[error("point {0:?} is not contained in the set")]
    OutsideSet(Vec<f64>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient evidence: {0}")]
    InsufficientEvidence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
