//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape or length mismatch between numeric operands.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid model or experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Token or object not present in the vocabulary.
    #[error("vocabulary error: {0}")]
    Vocab(String),

    /// Invalid operation input (empty stream, bad index set, out-of-range knob).
    #[error("input error: {0}")]
    Input(String),

    /// Sampling could not proceed (empty support).
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Probe or scene generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    /// Report I/O failure, carrying the offending path.
    #[error("report error at {path}: {source}")]
    Report {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Judge prompt template is missing a required placeholder.
    #[error("template error: {0}")]
    Template(String),

    /// Judge endpoint could not be reached.
    #[error("connection error: {0}")]
    Connection(String),

    /// Judge endpoint returned a non-2xx status.
    #[error("status error: HTTP {status}: {body}")]
    Status { status: u16, body: String },

    /// Judge response did not contain parseable scores.
    #[error("parse error: {reason}; raw response: {raw}")]
    Parse { reason: String, raw: String },
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn vocab(msg: impl Into<String>) -> Self {
        Error::Vocab(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
