use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("resource limit exceeded: {what} = {requested} (cap {cap})")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        cap: u128,
    },
    #[error("insufficient budget: {0}")]
    InsufficientBudget(String),
    #[error("dead end: the mixture assigns zero mass to every continuation")]
    DeadEnd,
    #[error("zero evidence: the mixture assigns zero mass to the history")]
    ZeroEvidence,
    #[error("effective horizon undefined: discount tail is zero at t = {0}")]
    UndefinedHorizon(u64),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("invalid environment class: {0}")]
    InvalidClass(String),
    #[error("unknown machine `{0}`")]
    UnknownMachine(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn limit(what: &'static str, requested: impl Into<u128>, cap: impl Into<u128>) -> Self {
        Error::ResourceLimit {
            what,
            requested: requested.into(),
            cap: cap.into(),
        }
    }
}
