use std::fmt;

use crate::model::ParameterSet;

/// Errors raised across the pipeline.
///
/// Every variant maps to a short stable code (see [`Error::code`]) so the
/// command-line front end can print one machine-parsable line per failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown subreddit source `{0}`")]
    UnknownSource(String),
    #[error("label `{label}` has only {count} posts (need at least 3)")]
    InsufficientClass { label: String, count: usize },
    #[error("duplicate post id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("dataset is empty")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("max_len {max_len} cannot hold markers plus one token per segment")]
    Length { max_len: usize },
    #[error("cosine similarity of two zero vectors")]
    ZeroVector,
    #[error("class `none` has no root forms")]
    NoRoots,
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Box<ParameterSet>,
    },
    #[error("invalid lexicon at line {line}: {reason}")]
    InvalidLexicon { line: usize, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed record at line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownSource(_) => "unknown_source",
            Error::InsufficientClass { .. } => "insufficient_class",
            Error::DuplicateId(_) => "duplicate_id",
            Error::EmptyCorpus => "empty_corpus",
            Error::Empty => "empty",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Length { .. } => "length",
            Error::ZeroVector => "zero_vector",
            Error::NoRoots => "no_roots",
            Error::Diverged { .. } => "diverged",
            Error::InvalidLexicon { .. } => "invalid_lexicon",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn shape(msg: impl fmt::Display) -> Self {
        Error::Shape(msg.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
