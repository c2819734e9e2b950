use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the engine and the CLI.
#[derive(Debug, Error)]
pub enum SciuError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("all samples pruned at epoch {epoch} (lambda = {lambda}): lower lambda")]
    AllPruned { epoch: usize, lambda: f64 },

    #[error("non-finite loss at epoch {epoch}, batch {batch} (sample ids {sample_ids:?})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        sample_ids: Vec<u64>,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl SciuError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SciuError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI.
    ///
    /// 2 for usage/configuration problems, 3 for degenerate runs (every sample
    /// pruned), 4 for numeric failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SciuError::Usage(_) | SciuError::Config(_) => 2,
            SciuError::AllPruned { .. } => 3,
            SciuError::NonFinite { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SciuError>;
