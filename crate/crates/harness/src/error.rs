use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid experiment: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] lig_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed trial csv row {row}: {msg}")]
    Record { row: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}
