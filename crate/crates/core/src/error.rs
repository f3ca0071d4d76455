use thiserror::Error;

/// Errors surfaced by valuations, referees, protocols and the adversary.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("valuation is not positive: {0}")]
    NotPositive(String),
    #[error("query budget exhausted ({budget} queries allowed)")]
    BudgetExhausted { budget: usize },
    #[error("player {player} out of range for {players} players")]
    NoSuchPlayer { player: usize, players: usize },
    #[error("allocation is not a partition of [0,1]: {0}")]
    PartitionViolation(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("numerically ambiguous comparison: {0}")]
    NumericalAmbiguity(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal fault: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
