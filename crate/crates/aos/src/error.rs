use std::path::PathBuf;

use aos_core::AosError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(AosError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 1 for configuration problems, 2 for failures
    /// during a run, 3 for anything involving files.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Run(AosError::Config(_)) => 1,
            CliError::Run(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
        }
    }
}

impl From<AosError> for CliError {
    fn from(e: AosError) -> Self {
        CliError::Run(e)
    }
}
