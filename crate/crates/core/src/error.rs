use thiserror::Error;

use crate::history::EpochRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid transition model: {0}")]
    InvalidTransitions(String),

    #[error("value iteration did not converge after {iters} sweeps (last residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    /// Training produced a non-finite objective. `history` holds every
    /// epoch completed before the failure.
    #[error("objective became non-finite at epoch {epoch}")]
    Divergence {
        epoch: usize,
        history: Vec<EpochRecord>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("state space too large: {states} states exceeds cap {cap}")]
    TooLarge { states: u128, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
