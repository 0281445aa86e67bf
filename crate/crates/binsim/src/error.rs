//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instruction: {line:?}")]
    MalformedInstruction { line: String },

    #[error("empty corpus: vocabulary construction needs at least one sequence")]
    EmptyCorpus,

    #[error("empty token sequence for snippet {snippet_id:?}")]
    EmptySequence { snippet_id: String },

    #[error("parse error at line {line}, column {column} (byte offset ~{offset}): {message}")]
    Parse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label must be 0 or 1, got {0}")]
    BadLabel(i64),

    #[error("unknown snippet id {0:?}")]
    UnknownSnippet(String),

    #[error("AUC needs both positive and negative examples")]
    SingleClass,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("corpus spec asks for {requested} negatives but only {available} other functions exist")]
    NotEnoughNegatives { requested: usize, available: usize },

    #[error("checkpoint vocab hash {found} does not match vocab file hash {expected}")]
    VocabHashMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
