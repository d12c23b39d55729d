use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("resonant parameters: {0}")]
    Resonant(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("not starshaped: {0}")]
    NotStarshaped(String),
    #[error("admissibility violated: {0}")]
    Admissibility(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cache error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
