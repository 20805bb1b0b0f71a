use std::path::PathBuf;

/// Errors produced by the fusegraph library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("line {line}: negative score {value}")]
    NegativeScore { line: usize, value: f64 },

    #[error("line {line}: non-finite score")]
    NonFiniteScore { line: usize },

    #[error("line {line}: unknown document id {doc_id:?}")]
    UnknownDocument { line: usize, doc_id: String },

    #[error("line {line}: duplicate entry ({row:?}, {col:?})")]
    DuplicateEntry { line: usize, row: String, col: String },

    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),

    #[error("invalid score vector: {0}")]
    InvalidScores(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("ranked list for query {0:?} contains a NaN score")]
    NanScore(String),

    #[error("empty corpus: no tokens survive stopword removal")]
    EmptyCorpus,

    #[error("document index {0} out of range")]
    UnknownDocIndex(usize),

    #[error("empty descriptor set")]
    EmptyDescriptors,

    #[error("need at least {needed} distinct descriptors to fit {needed} components, got {got}")]
    TooFewDescriptors { needed: usize, got: usize },

    #[error("descriptor at index {0} has no usable location")]
    MissingLocation(usize),

    #[error("query {0:?} has no non-zero text score")]
    EmptyTextResult(String),

    #[error("score vector has zero mass")]
    ZeroMass,

    #[error("diffusion did not converge after {iterations} iterations (last L1 delta {last_delta:e})")]
    NotConverged { iterations: usize, last_delta: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonzero weight on absent component {0}")]
    AbsentComponent(&'static str),

    #[error("query sets differ between the two systems")]
    MismatchedQueries,

    #[error("need at least 2 paired queries, got {0}")]
    TooFewQueries(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
