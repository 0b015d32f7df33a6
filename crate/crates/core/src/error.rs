//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedRecord {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sequence error: {0}")]
    Sequence(String),

    #[error(
        "sequence length {len} exceeds max positions {max}; truncate the sequence before scoring"
    )]
    OverLength { len: usize, max: usize },

    #[error("backend lifecycle error: {0}")]
    Lifecycle(String),

    #[error("unknown checkpoint id '{0}'")]
    UnknownCheckpoint(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("instance '{0}' is missing grounding labels")]
    MissingGroundingLabels(String),

    #[error("missing model snapshot: {0}")]
    MissingSnapshot(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::MalformedRecord {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
