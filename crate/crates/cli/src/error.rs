use mmlab_core::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unknown figure, malformed config, out-of-range parameter.
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub(crate) fn invalid(key: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{key}: {msg}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

/// Errors raised while an experiment is running.
impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
