use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("could not place {requested} UAVs {d_min} m apart after {attempts} proposals (best: {best})")]
    PackingFailure {
        requested: usize,
        d_min: f64,
        attempts: usize,
        best: usize,
    },
    #[error("elevation angle undefined: UAV and radar coincide")]
    DegenerateGeometry,
    #[error("path loss needs a positive distance, got {0} m")]
    InvalidDistance(f64),
    #[error("shadowing standard deviation is negative ({0} dB) at this elevation")]
    NegativeStd(f64),
    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("signal length {0} is too short for the edge model (need at least 4)")]
    InvalidLength(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no client updates to aggregate")]
    EmptyUpdateSet,
    #[error("SNR weights must be positive, got {0}")]
    NonPositiveSnr(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {key} {reason}")]
    Validation { key: &'static str, reason: String },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            key,
            reason: reason.into(),
        }
    }
}
