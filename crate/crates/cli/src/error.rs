use thiserror::Error;

/// CLI failure modes, mapped onto exit codes: validation errors (bad file
/// contents, inconsistent data) exit 1, usage errors (bad flags) exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Usage(_) => 2,
        }
    }
}

impl From<noisydet_core::Error> for CliError {
    fn from(err: noisydet_core::Error) -> Self {
        Self::Validation(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::Validation(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
