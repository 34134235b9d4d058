use alloc::string::String;
use core::fmt;

pub type Result<T, E = AosError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum AosError {
    /// Malformed arguments: wrong dimensions, empty sets, non-finite data.
    Input(String),
    /// Inconsistent experiment or strategy configuration.
    Config(String),
    /// A factorization or objective evaluation broke down.
    Numerical(String),
    /// A non-finite cross-validation error for one output.
    NonFiniteCvError { output: usize, value: f64 },
    /// Table ingestion failure with its location in the source text.
    Ingest {
        row: usize,
        column: String,
        message: String,
    },
}

impl AosError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        AosError::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        AosError::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        AosError::Numerical(msg.into())
    }
}

impl fmt::Display for AosError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AosError::Input(msg) => write!(f, "invalid input: {msg}"),
            AosError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            AosError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            AosError::NonFiniteCvError { output, value } => {
                write!(f, "cross-validation error of output {output} is not finite ({value})")
            }
            AosError::Ingest {
                row,
                column,
                message,
            } => write!(f, "row {row}, column '{column}': {message}"),
        }
    }
}

impl core::error::Error for AosError {}
