use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An iterative method failed to converge. `index` names the offending
    /// eigenpair or iterate when one exists.
    #[error("numerical failure{}: {message}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    NumericalFailure {
        index: Option<usize>,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
