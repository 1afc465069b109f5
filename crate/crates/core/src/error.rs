use thiserror::Error;

/// Errors surfaced by configuration loading, workload construction, and the
/// simulation engine itself.
///
/// `Invariant` means the simulator caught itself in an inconsistent state
/// (a flow-control or ownership bug); runs abort on it rather than producing
/// a report from corrupted state.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("input: {0}")]
    Input(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
