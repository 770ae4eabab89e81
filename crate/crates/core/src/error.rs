use thiserror::Error;

/// Errors raised by the game, noise, estimator and theory modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{what} supports at most {limit} players, got {n}")]
    Capacity {
        what: &'static str,
        limit: usize,
        n: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite objective at iteration {iteration}")]
    Numerical { iteration: usize },

    #[error("player {player}: {source}")]
    Player {
        player: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<S: Into<String>>(msg: S) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn domain<S: Into<String>>(msg: S) -> Error {
    Error::Domain(msg.into())
}
