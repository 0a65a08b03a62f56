use alloc::string::String;
use core::fmt;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// Two objects that must share a dimension do not.
    DimensionMismatch { expected: usize, found: usize },
    /// A 1-based signal index fell outside `1..=n`.
    IndexOutOfRange { index: usize, n: usize },
    /// The reference magnitude of the phase layer is zero, so relative
    /// phases cannot be recovered.
    ReferenceVanished,
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, n } => {
                write!(f, "index {index} outside 1..={n}")
            }
            Error::ReferenceVanished => f.write_str("reference magnitude vanished"),
        }
    }
}

impl core::error::Error for Error {}
