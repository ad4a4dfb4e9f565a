use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, failed validation or I/O trouble.
    #[error("{0}")]
    Config(String),
    /// A numerical self-check did not pass.
    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::SelfCheck(_) => 3,
        }
    }
}

impl From<specsmooth_core::Error> for CliError {
    fn from(e: specsmooth_core::Error) -> Self {
        match e {
            specsmooth_core::Error::NumericalFailure { .. } => CliError::SelfCheck(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
