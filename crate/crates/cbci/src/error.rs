//! Error type shared across the crate.

use crate::data_model::RecordId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: cannot read {text:?} as a finite number")]
    InvalidNumeric {
        row: usize,
        column: String,
        text: String,
    },

    #[error("column {column}: value {value:?} is not a declared level")]
    UnknownLevel { column: String, value: String },

    #[error("column {column}: encoded value {value} does not round to a level index in 1..={levels}")]
    LevelOutOfRange {
        column: String,
        value: f64,
        levels: usize,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("column {column} has no present values")]
    EmptyColumn { column: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing value where a complete one is required")]
    MissingCell,

    #[error("no present cells to measure a distance over")]
    NoPresentCells,

    #[error("record {id} is not assigned to any cluster")]
    NotAssigned { id: RecordId },

    #[error("cluster {index} has no members")]
    EmptyCluster { index: usize },

    #[error("cannot infer the cluster count: no labeled complete records")]
    NoLabeledRecords,

    #[error("cluster count {k} exceeds the {available} complete records")]
    NotEnoughRecords { k: usize, available: usize },

    #[error("invalid initialization: {0}")]
    InvalidInit(String),

    #[error("no complete records to act as donors")]
    EmptyDonorPool,

    #[error("record {id}: none of the top {k} donors carries a class label")]
    UnlabeledDonors { id: RecordId, k: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ground truth cell (record {id}, column {column}) is absent from the imputed dataset")]
    TruthMismatch { id: RecordId, column: String },
}
