use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid frequency band: {0}")]
    InvalidBand(String),
    #[error("model evaluation failed: {0}")]
    Model(String),
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error("no eligible epistemic samples")]
    EmptyEligibleSet,
    #[error("weight polytope is empty at threshold q = {q_threshold}")]
    EmptyPolytope { q_threshold: f64 },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
