use std::fmt;

/// Errors from the numeric layers of the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector had the wrong length for the dictionary it was used with.
    LengthMismatch { expected: usize, found: usize },
    /// A row or column index fell outside `1..=max`.
    IndexOutOfRange { index: usize, max: usize },
    /// Index lists passed to column materialization or refit must be
    /// strictly ascending.
    NonAscendingIndices,
    /// A configuration value violated its documented constraint.
    InvalidParameter(String),
    /// The requested fault layout cannot satisfy the separation constraint.
    InfeasibleTestbench(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, max } => {
                write!(f, "index {index} out of range 1..={max}")
            }
            Error::NonAscendingIndices => write!(f, "indices must be strictly ascending"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InfeasibleTestbench(msg) => write!(f, "infeasible testbench: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
