//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by corpus ingestion, graph construction, LP assembly and
/// solving, tokeniser training, and serialization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("input is not valid UTF-8: {context}")]
    InvalidUtf8 { context: String },

    #[error("pretokenisation pattern error: {message}")]
    Pattern { message: String },

    #[error("pretoken table is empty")]
    EmptyTable,

    #[error("problem dimensions overflow platform limits: {what}")]
    Overflow { what: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("instance too large for exhaustive search: {colours} colours exceeds limit {limit}")]
    TooLarge { colours: usize, limit: usize },

    #[error("unknown token {token:?}: {context}")]
    UnknownToken { token: String, context: String },

    #[error("duplicate special token {name:?}")]
    DuplicateSpecial { name: String },

    #[error("invalid token id {id} for vocabulary of size {vocab_size}")]
    InvalidId { id: u32, vocab_size: usize },

    #[error("unsupported tokeniser file version {found} (supported: {supported})")]
    SchemaVersion { found: u64, supported: u64 },

    #[error("tokeniser file corrupt: {message}")]
    Checksum { message: String },

    #[error("configuration mismatch: {message}")]
    ConfigMismatch { message: String },

    #[error("invalid distribution: {message}")]
    InvalidDistribution { message: String },

    #[error("invalid argument: {message}")]
    InvalidArgument { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
