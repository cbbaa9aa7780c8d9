use std::process::ExitCode;

/// Failure of a subcommand, classified by who has to act on it.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, manifest or parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Missing, unreadable or malformed input data and output files.
    #[error("data error: {0}")]
    Data(String),
    /// Anything that went wrong while computing or serving.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(e: impl ToString) -> Self {
        Self::Config(e.to_string())
    }

    pub fn data(e: impl ToString) -> Self {
        Self::Data(e.to_string())
    }

    pub fn runtime(e: impl ToString) -> Self {
        Self::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Runtime(_) => 4,
        })
    }
}
