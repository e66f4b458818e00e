use std::io;

/// Crate-wide error type.
///
/// The three variants deliberately mirror the exit codes of the `tempest`
/// binary: validation failures exit with 2, numeric failures with 3 and
/// I/O failures with 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Rejected input: bad configuration values, malformed files, violated
    /// preconditions.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numeric routine failed: non-convergent quadrature, non-finite
    /// intermediate, degenerate denominator.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// File-system or stream failure.
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::Numeric(_) => 3,
            Error::Io(_) => 4,
        }
    }
}
