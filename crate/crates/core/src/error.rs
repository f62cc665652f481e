use std::path::PathBuf;

use thiserror::Error;

use crate::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("label column {0:?} not found")]
    MissingLabelColumn(String),
    #[error("class {class} has {count} member(s); at least 2 are required to split")]
    ClassTooSmall { class: Label, count: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("invalid precision set: {0}")]
    InvalidPrecisionSet(String),
    #[error("instance was discretized at precisions {found:?} but the model uses {expected:?}")]
    PrecisionMismatch { expected: Vec<u32>, found: Vec<u32> },
    #[error("schema mismatch at column {column}: expected {expected:?}, found {found:?}")]
    SchemaMismatch {
        column: usize,
        expected: String,
        found: String,
    },
    #[error("reference miner accepts at most {limit} instances, got {got}")]
    OracleTooLarge { limit: usize, got: usize },
    #[error("length mismatch: {0} truth labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("non-finite ranking score at position {0}")]
    NonFiniteScore(usize),
    #[error("unsupported model version {0:?}")]
    ModelVersion(String),
    #[error("model was written with scalar {found}, expected {expected}")]
    ModelScalar { expected: String, found: String },
    #[error("model checksum mismatch (file truncated or corrupted)")]
    ModelChecksum,
    #[error("model line {line}: {message}")]
    ModelParse { line: usize, message: String },
    #[error("split ratio {ratio}: {source}")]
    GridCell {
        ratio: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by the input data rather than by the program
    /// or a model file.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::RaggedRow { .. }
            | Error::MissingLabelColumn(_)
            | Error::ClassTooSmall { .. }
            | Error::SchemaMismatch { .. }
            | Error::ModelVersion(_)
            | Error::ModelScalar { .. }
            | Error::ModelChecksum
            | Error::ModelParse { .. } => true,
            Error::GridCell { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}
