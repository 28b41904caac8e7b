use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line tool.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: file has no header row")]
    EmptyFile { path: PathBuf },

    #[error("{path}: no data rows remain")]
    NoRows { path: PathBuf },

    #[error("{path}: column {column:?} not found in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column {column:?}: {value:?} is not a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}, column {column:?}: {value:?} is not 0 or 1")]
    NonBinary {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Estimation(#[from] labelboot::Error),
}

impl CliError {
    /// Process exit code: 1 for estimation failures, 2 for bad input or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Estimation(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
