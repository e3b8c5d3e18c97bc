//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector lengths disagree where they must match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An intermediate value of a weight update left the finite range.
    #[error("numeric overflow in weight update (reduce the step size): {0}")]
    NumericOverflow(String),

    /// A value violates its domain contract (range, sign, emptiness, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The short and long reference models are indistinguishable on the
    /// metric in question, so the benefit denominator is ill-posed.
    #[error("degenerate references: {metric} denominator {denominator} <= {epsilon}")]
    DegenerateReferences {
        metric: &'static str,
        denominator: f64,
        epsilon: f64,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate id {id:?} at {path}:{line}")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },

    /// A record needs an externally supplied token count and none is present.
    #[error("missing token count for record {id:?} (external tokenizer configured)")]
    MissingTokenCount { id: String },

    /// A stored token count disagrees with the configured tokenizer.
    #[error("token count mismatch for record {id:?}: stored {stored}, recomputed {recomputed}")]
    TokenCountMismatch {
        id: String,
        stored: u64,
        recomputed: u64,
    },

    #[error("unknown source datasets (no difficulty rule): {0}")]
    UnknownSources(String),

    #[error("compression rate undefined: original token count must be positive, got {0}")]
    ZeroOriginalTokens(f64),

    #[error("normalization undefined: original value must be positive, got {0}")]
    ZeroOriginalValue(f64),

    #[error("no checkpoint meets the accuracy threshold {threshold}")]
    NoQualifyingCheckpoint { threshold: f64 },

    /// The external trainer violated the wire protocol.
    #[error("trainer protocol error: {message}\n--- transcript (most recent last) ---\n{transcript}")]
    Protocol { message: String, transcript: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable kind tag, stable for downstream tooling.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NumericOverflow(_) => "numeric-overflow",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DegenerateReferences { .. } => "degenerate-references",
            Error::Parse { .. } => "parse-error",
            Error::DuplicateId { .. } => "duplicate-id",
            Error::MissingTokenCount { .. } => "missing-token-count",
            Error::TokenCountMismatch { .. } => "token-count-mismatch",
            Error::UnknownSources(_) => "unknown-sources",
            Error::ZeroOriginalTokens(_) => "zero-original-tokens",
            Error::ZeroOriginalValue(_) => "zero-original-value",
            Error::NoQualifyingCheckpoint { .. } => "no-qualifying-checkpoint",
            Error::Protocol { .. } => "protocol-error",
            Error::Config(_) => "config-error",
            Error::Io(_) => "io-error",
            Error::Json(_) => "json-error",
        }
    }
}
