use std::path::PathBuf;

use thiserror::Error;

/// Which side of a Matthew-degree fit failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSide {
    Recommendations,
    TrainingData,
}

impl std::fmt::Display for FitSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitSide::Recommendations => f.write_str("recommendations"),
            FitSide::TrainingData => f.write_str("training data"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value in parameter `{param}`")]
    NumericOverflow { param: &'static str },

    #[error("training diverged at epoch {epoch}, step {step}: non-finite `{param}`")]
    Diverged {
        epoch: usize,
        step: usize,
        param: &'static str,
    },

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("no valid rows in {0}")]
    NoValidRows(PathBuf),

    #[error("cannot encode context column `{column}`: {reason}")]
    Encoding { column: String, reason: String },

    #[error("undefined rank-frequency fit: fewer than 2 positive counts")]
    UndefinedFit,

    #[error("undefined rank-frequency fit on {0} side")]
    UndefinedFitSide(FitSide),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by parameters leaving the finite range.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::NumericOverflow { .. } | Error::Diverged { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
