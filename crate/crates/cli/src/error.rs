use blmol_core::blmol::BlmolError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing stage: {0}")]
    MissingStage(&'static str),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingStage(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn other(message: impl Into<String>) -> Self {
        CliError::Other(anyhow::anyhow!(message.into()))
    }
}

impl From<BlmolError> for CliError {
    fn from(e: BlmolError) -> Self {
        if e.is_numerical() || matches!(e, BlmolError::EmptyArchive) {
            CliError::Numerical(e.to_string())
        } else if matches!(e, BlmolError::Problem(_)) {
            CliError::Config(e.to_string())
        } else {
            CliError::Other(e.into())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
