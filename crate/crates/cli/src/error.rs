use thiserror::Error;

/// Command failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("stage {stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("stage {stage}: {message}")]
    Provider { stage: &'static str, message: String },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn data(stage: &'static str, message: impl ToString) -> Self {
        CliError::Data { stage, message: message.to_string() }
    }

    pub fn provider(stage: &'static str, message: impl ToString) -> Self {
        CliError::Provider { stage, message: message.to_string() }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CliError::Usage(_) => None,
            CliError::Data { stage, .. } | CliError::Provider { stage, .. } => Some(stage),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Provider { .. } => 3,
        }
    }
}
