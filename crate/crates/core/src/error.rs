use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate session id `{0}`")]
    DuplicateSession(String),

    #[error("duplicate query id `{0}`")]
    DuplicateQuery(String),

    #[error("document `{doc_id}` appears with conflicting titles")]
    ConflictingTitle { doc_id: String },

    #[error("turn `{query_id}` in session `{session_id}` has no candidates")]
    NoCandidates { session_id: String, query_id: String },

    #[error("relevance {value} for document `{doc_id}` is outside [0, 4]")]
    RelevanceOutOfRange { doc_id: String, value: i64 },

    #[error("unknown document id `{0}`")]
    UnknownDoc(String),

    #[error("no eligible term to sample")]
    NoEligibleTerm,

    #[error("query has no tokens")]
    EmptyQuery,

    #[error("corpus has no documents")]
    EmptyCorpus,

    #[error("no training pairs")]
    NoTrainingPairs,

    #[error("only {available} eligible queries for {requested} random replacements")]
    InsufficientPool { requested: usize, available: usize },

    #[error("window position {pos} outside [1, {w_size}]")]
    PositionOutOfRange { pos: usize, w_size: usize },

    #[error("sequence of {needed} tokens cannot fit max_len {max_len} even without history")]
    Unfittable { needed: usize, max_len: usize },

    #[error("query `{0}` has no clicks")]
    ZeroClicks(String),

    #[error("query `{0}` cannot be traced to a session")]
    Untraceable(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
