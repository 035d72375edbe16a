//! Reading and writing the artifacts the command line works with: covariate
//! tables, assignment matrices, probability vectors, run manifests and JSON
//! reports.
//!
//! CSV files use `,` separators, `.` decimals and LF line endings.

mod manifest;
mod preprocess;
pub mod report;
mod table;

pub use manifest::{sha256_file, sha256_hex, unix_now, write_json, RunManifest};
pub use preprocess::{preprocess, Preprocessing, WHITEN_DROP_TOL};
pub use table::{read_assignments, read_column, read_csv, read_probabilities, write_assignments, Dataset, Schema};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: u64, column: usize, message: String },
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: u64, column: usize },
    #[error("column {0:?} not found")]
    MissingColumn(String),
    #[error("column {0:?} appears more than once")]
    DuplicateColumn(String),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] crate::error::Error),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
