use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid row selection: {0}")]
    InvalidSelection(String),

    #[error("invalid identifier `{input}`: {reason}")]
    InvalidIdentifier { input: String, reason: String },

    #[error("cache read failed for {path}: {source}")]
    CacheRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cache write failed for {path}: {source}")]
    CacheWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cache miss for op `{op}` on columns [{columns}] at row {row}")]
    CacheMiss {
        op: String,
        columns: String,
        row: usize,
    },

    #[error("operation `{op}` failed on row {row}: {message}")]
    OpFailed {
        op: String,
        row: usize,
        message: String,
    },

    #[error("invalid interval {interval}: {reason}")]
    InvalidInterval { interval: String, reason: String },

    #[error("non-finite score at row {0}")]
    NonFiniteScore(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schema mismatch: {}", .0.join(", "))]
    SchemaMismatch(Vec<String>),

    #[error("no article sentences")]
    NoArticleSentences,

    #[error("duplicate slice name `{0}`")]
    DuplicateSlice(String),

    #[error("integrity check failed for {path}: expected {expected}, found {actual}")]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("bundle error in {path}: {message}")]
    Bundle { path: PathBuf, message: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("missing prediction for example {fingerprint} in slice `{slice}`")]
    MissingPrediction { fingerprint: String, slice: String },

    #[error("conflicting predictions for example {0}")]
    ConflictingPrediction(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("report mismatch: {0}")]
    ReportMismatch(String),

    #[error("slice `{slice}`: {source}")]
    InSlice {
        slice: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_slice(self, slice: &str) -> Self {
        Error::InSlice {
            slice: slice.to_string(),
            source: Box::new(self),
        }
    }
}
