//! Crate-wide error type. Variants map one-to-one onto the failure classes
//! the operations promise, so CLI consumers can report a stable error kind.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("parameter: {0}")]
    Param(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed or truncated input that never produced a value.
    #[error("parse: {0}")]
    Parse(String),

    /// A file carried an unsupported format version.
    #[error("version: {0}")]
    Version(String),

    /// Structurally valid input whose content breaks a domain invariant.
    #[error("validation: {0}")]
    Validation(String),

    /// Point clouds tagged with incompatible coordinate frames or frame ids.
    #[error("frame: {0}")]
    Frame(String),

    /// Data handed to an operation that its contract forbids.
    #[error("contract: {0}")]
    Contract(String),

    /// Grid dimensions disagree or are too small for the operation.
    #[error("shape: {0}")]
    Shape(String),

    /// Training produced a non-finite loss.
    #[error("divergence: {0}")]
    Divergence(String),

    /// An exhaustive search would exceed its evaluation budget.
    #[error("budget: {0}")]
    Budget(String),
}

impl Error {
    /// Stable machine-readable kind, used for single-line CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Param(_) => "parameter",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
            Error::Version(_) => "version",
            Error::Validation(_) => "validation",
            Error::Frame(_) => "frame",
            Error::Contract(_) => "contract",
            Error::Shape(_) => "shape",
            Error::Divergence(_) => "divergence",
            Error::Budget(_) => "budget",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
