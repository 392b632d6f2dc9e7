use std::path::PathBuf;

/// Errors raised anywhere in the clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    /// `k` exceeds the number of available points.
    #[error("requested {k} clusters from only {n} points")]
    TooFewPoints { k: usize, n: usize },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("partitioning failed: {0}")]
    Partition(String),

    /// A metric whose formula degenerates to 0/0 on the given labelings.
    #[error("metric undefined: {0}")]
    Undefined(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    /// Wraps a failure with the pipeline stage that produced it.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
