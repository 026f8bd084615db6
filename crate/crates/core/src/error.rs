use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: duplicate seq index {seq}")]
    DuplicateIndex { line: usize, seq: u64 },

    #[error("line {line}: rssi {rssi} dBm outside [-148, 0]")]
    RssiRange { line: usize, rssi: i32 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("correlation undefined for a constant series")]
    UndefinedCorrelation,

    #[error("empty input")]
    EmptyInput,

    #[error("{test}: sequence of {got} bits is shorter than the minimum {min}")]
    SequenceTooShort {
        test: &'static str,
        min: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("protocol violation: ACK frequency differs from its uplink at seq {seqs:?}")]
    ProtocolViolation { seqs: Vec<u64> },

    #[error("reconciliation failed in blocks {failed_blocks:?}")]
    Reconcile { failed_blocks: Vec<usize> },

    #[error("requested {requested} output bits but the digest has only {max}")]
    UnsupportedLength { requested: usize, max: usize },

    #[error("entropy budget of {available} bits is below the requested {requested}")]
    EntropyBudget { available: i64, requested: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
