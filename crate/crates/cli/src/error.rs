use std::io;
use std::path::Path;
use std::process::ExitCode;

use augprobe::ErrorCategory;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {reason}")]
    Data { path: String, reason: String },

    #[error(transparent)]
    Core(#[from] augprobe::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(path: &Path, reason: impl ToString) -> Self {
        CliError::Data {
            path: path.display().to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        Self::data(path, e)
    }

    /// 1 usage error, 2 data error, 3 numerical failure.
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numerical => 3,
            },
        };
        ExitCode::from(code)
    }
}
