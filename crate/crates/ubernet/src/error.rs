//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// Variants are grouped by what went wrong rather than where: callers (in
/// particular the CLI) map them onto exit codes and user-facing messages.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file content; names the file and 1-based line.
    #[error("parse error in {file} line {line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    /// Declared schema and observed data disagree (unknown feature, missing
    /// column, duplicate name, invalid tag, fingerprint mismatch at ingest).
    #[error("schema error: {0}")]
    Schema(String),

    /// An operation's preconditions were violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Dimension or length mismatch between containers.
    #[error("size mismatch: {0}")]
    Size(String),

    /// A value fell outside its admissible range.
    #[error("range error: {0}")]
    Range(String),

    /// Invalid runtime input to the model (e.g. out-of-range categorical
    /// index).
    #[error("input error: {0}")]
    Input(String),

    /// Numeric failure: non-finite intermediate, singular system, overflow.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Missing data could not be filled.
    #[error("imputation error: {0}")]
    Imputation(String),

    /// A cross-validation fold plan could not be constructed.
    #[error("fold plan error: {0}")]
    Plan(String),

    /// Training produced a non-finite loss and was aborted.
    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    Divergence { epoch: usize },

    /// Checkpoint is readable but incompatible with the requested use.
    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),

    /// Artifact bytes are not in the expected format (truncation, bad JSON).
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(file: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn imputation(msg: impl Into<String>) -> Self {
        Error::Imputation(msg.into())
    }

    pub fn plan(msg: impl Into<String>) -> Self {
        Error::Plan(msg.into())
    }

    pub fn incompatible(msg: impl Into<String>) -> Self {
        Error::Incompatible(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
