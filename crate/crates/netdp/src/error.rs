//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("skipped {skipped} of {total} edge lines, above the allowed rate {max_rate}")]
    SkipRateExceeded {
        skipped: u64,
        total: u64,
        max_rate: f64,
    },

    #[error("bad file format in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("unknown parameter key {0}")]
    UnknownKey(u64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("node {0} has no neighbors")]
    NoNeighbors(u64),

    #[error("barrier timed out after {waited_ms} ms at epoch {epoch}")]
    BarrierTimeout { epoch: u64, waited_ms: u64 },

    #[error("barrier called with epoch {got} while a rendezvous for epoch {expected} is open")]
    BarrierEpochMismatch { expected: u64, got: u64 },

    #[error("{context}: only one class present")]
    SingleClass { context: String },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{dropped} of {total} rows dropped ({reason}), above the allowed rate {max_rate}")]
    DropRateExceeded {
        dropped: usize,
        total: usize,
        max_rate: f64,
        reason: String,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
