use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: record missing text")]
    MissingText { path: PathBuf, line: usize },

    #[error("{path}:{line}: unknown label {label:?}")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },

    #[error("{path}:{line}: unknown split tag {split:?} (expected train, dev or test)")]
    UnknownSplit {
        path: PathBuf,
        line: usize,
        split: String,
    },

    #[error("{path}:{line}: {split} record has no label")]
    MissingLabel {
        path: PathBuf,
        line: usize,
        split: &'static str,
    },

    #[error("{path}:{line}: document is empty after preprocessing")]
    EmptyDocument { path: PathBuf, line: usize },

    #[error("corpus has no train documents")]
    NoTrainDocuments,

    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),

    #[error("invalid preprocessing config: {0}")]
    InvalidPreprocess(String),

    #[error("external tokenizer failed: {0}")]
    Tokenizer(String),

    #[error("vocabulary is empty (min_df = {min_df})")]
    EmptyVocabulary { min_df: usize },

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("duplicate edge ({row}, {col})")]
    DuplicateEdge { row: usize, col: usize },

    #[error("edge ({row}, {col}) has invalid weight {weight}")]
    InvalidWeight { row: usize, col: usize, weight: f64 },

    #[error("row {row} has non-positive degree {degree}")]
    NonPositiveDegree { row: usize, degree: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("{path}: bad magic bytes, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: &'static str,
    },

    #[error("{path}: row count mismatch: file has {found} rows, corpus has {expected} documents")]
    RowCountMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: document id order mismatch at row {row}: expected {expected}, found {found}")]
    OrderMismatch {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: non-finite value at row {row}, column {col}")]
    NonFiniteValue {
        path: PathBuf,
        row: usize,
        col: usize,
    },

    #[error("{path}: truncated payload: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: malformed header: {message}")]
    MalformedHeader { path: PathBuf, message: String },

    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),

    #[error("loss mask selects no documents")]
    EmptyMask,

    #[error("no dev documents but early stopping was requested")]
    NoDevDocuments,

    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("length mismatch: {golds} gold labels vs {preds} predictions")]
    LengthMismatch { golds: usize, preds: usize },

    #[error("class list is empty")]
    EmptyClassList,

    #[error("total class support is zero")]
    ZeroSupport,

    #[error("lambda grid is empty")]
    EmptyGrid,

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 2 for numerical failures, 1 for
    /// everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteLoss { .. } => 2,
            _ => 1,
        }
    }
}
