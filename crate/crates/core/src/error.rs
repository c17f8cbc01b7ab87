//! Error type shared by all modules.

use std::fmt;

/// Errors produced by the simulator, grouped by the exit code they map to
/// in the command-line tool (config 2, numerical 3, I/O 4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Invalid configuration or dimension constraint violation.
    Config(String),
    /// Numerical failure: rank deficiency, singular system, non-convergence.
    Numerical(String),
    /// File system or serialization failure.
    Io(String),
}

impl Error {
    /// Process exit code for the CLI (`0` is success).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }

    /// Prefix the message with additional context.
    pub fn context(self, ctx: &str) -> Error {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
            Error::Io(m) => Error::Io(format!("{ctx}: {m}")),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Numerical(m) => write!(f, "numerical error: {m}"),
            Error::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
