use std::io;

use thiserror::Error;

/// Errors raised while reading or writing an evidence database file.
#[derive(Debug, Error)]
pub enum DbError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an evidence database (bad magic header)")]
    BadMagic,
    #[error("unsupported database version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch: header says {expected}, body hashes to {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("malformed database at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Failures of an embedding provider.
#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    Unavailable(String),
    #[error("no embedding cached for text {0:?}")]
    Missing(String),
    #[error("embedding provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding contains a non-finite component")]
    NonFinite,
}

/// Structural problems with a parsed sentence.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SentenceError {
    #[error("token {token} has head {head}, outside 0..{len}")]
    HeadOutOfRange { token: usize, head: usize, len: usize },
    #[error("dependency cycle through token {0}")]
    Cycle(usize),
    #[error("reference position {position} outside 0..{len}")]
    RefOutOfRange { position: usize, len: usize },
    #[error("reference at position {0} cites no papers")]
    EmptyRef(usize),
    #[error("sentence has no citation markers")]
    NoRefs,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
}

/// Errors surfaced by the query pipeline.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error("rank maps cover different span sets")]
    RankKeyMismatch,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
}
