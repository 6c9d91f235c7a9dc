use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    #[error("divergence estimation failed: {0}")]
    Estimation(String),

    #[error("hull projection failed: {failed} of {total} grid evaluations failed")]
    ProjectionFailed { failed: usize, total: usize },

    #[error("policy update failed: {0}")]
    UpdateFailed(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Stable machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Unsupported(_) => "unsupported",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::Estimation(_) => "estimation",
            Error::ProjectionFailed { .. } => "projection_failed",
            Error::UpdateFailed(_) => "update_failed",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
