//! Crate-wide error type.

use std::fmt;

/// Error category for every fallible operation in the crate.
///
/// The CLI maps `Usage` to exit code 1 and everything else to exit code 2.
#[derive(Debug)]
pub enum Error {
    /// Tensor or feature-map shape disagreement; message names both shapes.
    Shape(String),
    /// A precondition on argument values was violated.
    Contract(String),
    /// An object was used after its lifetime rule forbids it (e.g. a
    /// consumed graph).
    State(String),
    /// Byte-level parse failure; `offset` points at the offending byte.
    Parse { offset: usize, msg: String },
    /// Lookup of an unknown key (style id, checkpoint tensor name).
    Lookup(String),
    /// Malformed file contents (checkpoint, manifest, config, CSV).
    Format(String),
    /// Bad invocation: unknown flag, missing argument, wrong mode.
    Usage(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Contract(msg) => write!(f, "contract error: {msg}"),
            Error::State(msg) => write!(f, "state error: {msg}"),
            Error::Parse { offset, msg } => write!(f, "parse error at byte {offset}: {msg}"),
            Error::Lookup(msg) => write!(f, "lookup error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl Error {
    /// CLI exit code for this error: 1 for usage problems, 2 for data,
    /// format, and internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
