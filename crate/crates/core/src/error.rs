use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("an execution is already in progress")]
    ExecutionAlreadyActive,
    #[error("no execution in progress")]
    NoActiveExecution,
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("initial corpus is empty")]
    EmptyCorpus,
    #[error("target failed to initialise: {0}")]
    TargetInitFailure(String),
    #[error("input history does not reproduce the crash")]
    NotReproducible,
    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
