use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model specification error: {0}")]
    Specification(String),

    #[error("degenerate Markov chain: p01 + p10 must be positive")]
    DegenerateChain,

    #[error("outcome {outcome} out of range 1..={count}")]
    OutcomeOutOfRange { outcome: u32, count: usize },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("state block of length {0} exceeds the enumeration bound of 20")]
    BlockTooLong(usize),

    #[error("chain {chain} aborted at draw {draw}: {message}")]
    ChainAborted { chain: usize, draw: usize, message: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("chain store error: {0}")]
    Store(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("analysis unavailable: {0}")]
    Unavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
