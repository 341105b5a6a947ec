use std::io;

use thiserror::Error;

/// Every failure mode surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("spectrum too short: {len} samples (minimum {min})")]
    TooShort { len: usize, min: usize },
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("parse failure at line {line}: {message}")]
    ParseFailure { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("signal has zero power")]
    ZeroPowerSignal,
    #[error("penalized least-squares system is singular")]
    SingularSystem,
    #[error("{requested} levels requested but at most {max} are feasible for length {len}")]
    TooManyLevels {
        requested: usize,
        max: usize,
        len: usize,
    },
    #[error("signal length {len} shorter than filter length {filter_len}")]
    LengthTooShort { len: usize, filter_len: usize },
    #[error("coefficient pyramid bookkeeping mismatch: {0}")]
    BookkeepingMismatch(String),
    #[error("empty coefficient level")]
    EmptyLevel,
    #[error("all points excluded from MAPE (floor {floor})")]
    AllPointsExcluded { floor: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a cached forward pass")]
    MissingForwardCache,
    #[error("training loss became non-finite in epoch {0}")]
    Diverged(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u32),
    #[error("malformed checkpoint header: {0}")]
    BadHeader(String),
    #[error("parameter count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("method {0} requires a checkpoint")]
    MissingCheckpoint(String),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Errors caused by the numbers themselves rather than by malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteValue(_)
                | Error::ZeroPowerSignal
                | Error::SingularSystem
                | Error::Diverged(_)
                | Error::AllPointsExcluded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
