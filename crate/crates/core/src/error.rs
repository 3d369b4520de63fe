use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown operator {0:?}")]
    UnknownOperator(String),
    #[error("duplicate field name {0:?}")]
    DuplicateName(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: header has no recognized fields")]
    NoRecognizedFields { path: PathBuf },
    #[error("no input files")]
    NoInput,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("column directory does not match the schema: {0}")]
    SchemaMismatch(String),
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("field {field} is {actual}, expected {expected}")]
    WrongType {
        field: String,
        expected: crate::schema::DataType,
        actual: crate::schema::DataType,
    },
    #[error("row has {got} cells, schema has {expected} fields")]
    RowWidth { expected: usize, got: usize },
    #[error("field {field}: {value_kind} value does not fit a {data_type} column")]
    CellType {
        field: String,
        value_kind: &'static str,
        data_type: crate::schema::DataType,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CpvError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("duplicate code {code} on lines {first_line} and {second_line}")]
    DuplicateCode {
        code: String,
        first_line: u64,
        second_line: u64,
    },
    #[error("invalid code {0:?}: expected at least two digits")]
    InvalidCode(String),
    #[error("digit limit {0} outside 2..=8")]
    DigitLimit(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuestError {
    #[error("no quest available: no (division, country, year) reaches {min_support} rows")]
    NoQuestAvailable { min_support: usize },
    #[error("store is empty")]
    EmptyStore,
}
