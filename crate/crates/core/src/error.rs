//! Shared error type for the analysis library.

use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped by how the CLI reports them: bad bytes on disk
/// (`Format`, `Unsupported`), bad caller input (`Argument`, `Validation`),
/// and inputs that are structurally fine but carry no usable signal
/// (`Degenerate`, `Data`).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed container or file contents.
    #[error("format error: {0}")]
    Format(String),

    /// Recognized container but an encoding we do not handle.
    #[error("unsupported format: {0}")]
    Unsupported(String),

    /// A parameter violated an operation's contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A structured input (model, matrix, config) failed consistency checks.
    #[error("validation error: {0}")]
    Validation(String),

    /// Input had no usable signal (all-zero frames, constant samples, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Missing or inconsistent data discovered while aggregating.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
