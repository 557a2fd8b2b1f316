use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or option combination is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with inputs violating its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Sample data is unusable (non-finite values, ragged rows).
    #[error("data error: {0}")]
    Data(String),

    /// A numeric argument is outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough usable points to estimate a quantity.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Input text could not be parsed. Line and column are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),

    /// An internal invariant did not hold.
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
