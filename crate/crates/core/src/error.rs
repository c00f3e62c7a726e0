use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A malformed input record; `line` is 1-based.
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("class {class} has {available} labeled nodes, {required} required for training")]
    InsufficientLabels { class: usize, available: usize, required: usize },

    #[error("covariance matrix is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { source_name: source_name.into(), line, message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
