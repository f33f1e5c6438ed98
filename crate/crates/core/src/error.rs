use thiserror::Error;

/// Errors raised anywhere in the solver. The CLI maps `Validation` to exit
/// status 2 and `Numerical` to exit status 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("config error at line {line}, [{section}].{key}: {msg}")]
    Config {
        line: usize,
        section: String,
        key: String,
        msg: String,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Config { .. } => 2,
            Error::Numerical(_) | Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numerical(msg.into()))
}
