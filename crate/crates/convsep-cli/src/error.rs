use thiserror::Error;

/// Harness-level errors, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or flags (exit code 1).
    #[error("config error: {0}")]
    Config(String),

    /// Unreadable or malformed input data (exit code 2).
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure during training or separation (exit code 3).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> CliError {
        CliError::Data(msg.into())
    }
}

impl From<convsep::Error> for CliError {
    fn from(e: convsep::Error) -> CliError {
        match e {
            convsep::Error::Numerical { .. } | convsep::Error::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
            convsep::Error::SignalTooShort { .. } => CliError::Data(e.to_string()),
            convsep::Error::ShapeMismatch(_) | convsep::Error::InvalidArgument(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
