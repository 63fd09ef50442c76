use std::path::PathBuf;

use thiserror::Error;

use crate::dimensions::Dimension;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("readings out of order at index {index}: timestamp {timestamp} follows {previous}")]
    Ordering {
        index: usize,
        previous: i64,
        timestamp: i64,
    },

    #[error("window length must be at least 1")]
    ZeroWindowLength,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("{dimension} score undefined for window {window_id}: {reason}")]
    Dimension {
        dimension: Dimension,
        window_id: u64,
        reason: String,
    },

    #[error("bin grids differ ({left} vs {right} bins or mismatched edges)")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid histogram: {0}")]
    Histogram(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("mutation plan error: {0}")]
    Plan(String),

    #[error("development failed after {iterations} iteration(s): {reason}")]
    DevelopmentFailed { iterations: usize, reason: String },

    #[error("window {window_id}: {source}")]
    InWindow {
        window_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Artifact {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn in_window(self, window_id: u64) -> Self {
        match self {
            e @ Error::InWindow { .. } => e,
            e => Error::InWindow {
                window_id,
                source: Box::new(e),
            },
        }
    }
}
