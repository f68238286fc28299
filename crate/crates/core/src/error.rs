use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no score available for candidate `{0}`")]
    MissingScore(String),

    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("candidate `{id}` is not part of session `{query_id}`")]
    UnknownCandidate { query_id: String, id: String },

    #[error("unknown query `{0}`")]
    UnknownQuery(String),

    #[error("duplicate id `{id}` at position {position}")]
    DuplicateId { id: String, position: usize },

    #[error("invalid session `{query_id}`: {reason}")]
    InvalidSession { query_id: String, reason: String },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("candidate `{0}` has no simulator ground truth")]
    MissingSimTruth(String),

    #[error("{stage} diverged (non-finite value) at {unit} {index}")]
    Diverged {
        stage: &'static str,
        unit: &'static str,
        index: usize,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("query sets differ; missing from one side: {}", .0.join(", "))]
    QuerySetMismatch(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Csv { .. } | Error::Json(_) => 4,
            Error::MissingDependency(_) => 5,
            Error::Diverged { .. } => 6,
            Error::QuerySetMismatch(_) => 7,
            _ => 8,
        }
    }
}
