use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range. `field` names the offending key.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// An operation was called with inputs violating its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A resource limit (node budget) would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Unknown node or token id.
    #[error("lookup failed: {0}")]
    Lookup(String),

    /// Malformed line in a text format. Lines are 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config { field: field.to_string(), message: message.into() }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
