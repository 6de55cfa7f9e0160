use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced while loading data, evaluating models, or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset file {path} at line {line}: {msg}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("record `{id}` has feature dimension {got}, dataset declares {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("record `{id}` has duration {duration} exceeding horizon {horizon}")]
    HorizonExceeded {
        id: String,
        duration: usize,
        horizon: usize,
    },
    #[error("non-finite value in record `{id}`")]
    NonFinite { id: String },
    #[error("record `{id}` has no states")]
    EmptyRecord { id: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("offset {offset} out of range {min}..={max}")]
    OffsetOutOfRange {
        offset: usize,
        min: usize,
        max: usize,
    },
    #[error("parameter layout mismatch")]
    LayoutMismatch,
    #[error("numerical failure in sequence `{id}`: {msg}")]
    NumericalFailure { id: String, msg: String },
    #[error("training aborted at epoch {epoch}, batch {batch}: {source}")]
    TrainAborted {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("intercept calibration failed: {msg}")]
    Calibration { msg: String },
    #[error("invalid configuration: {msg}")]
    InvalidConfig { msg: String },
    #[error("metric undefined: {msg}")]
    UndefinedMetric { msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig { msg: msg.into() }
    }
}
