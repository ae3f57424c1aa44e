use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A flat weight vector or matrix does not have the size the shape requires.
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// A forward pass produced a non-finite intermediate value.
    #[error("non-finite value in forward pass at sample {sample}")]
    Numeric { sample: usize },

    /// Invalid arguments or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// A statistical test whose loss differential has no variance.
    #[error("degenerate test: {0}")]
    Degenerate(String),

    #[error("overfitting ratio undefined: test RMSE is zero")]
    UndefinedRatio,

    /// An error raised inside a named pipeline stage.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// A multi-seed batch stopped at a failing seed.
    #[error("seed {seed} failed after {} completed run(s), partial results in {}: {source}", .completed.len(), .partial.display())]
    SeedFailed {
        seed: u64,
        completed: Vec<u64>,
        partial: PathBuf,
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps this error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The pipeline stage this error was raised in, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
