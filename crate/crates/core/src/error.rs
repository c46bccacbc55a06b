use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{malformed} of {total} lines malformed (limit 10%), lines {lines:?}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        lines: Vec<usize>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("social source: {0}")]
    Source(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("scorer: {0}")]
    Scorer(String),

    #[error("annotation rejected: {0}")]
    Annotation(String),

    #[error("round rejected: {0}")]
    Round(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
