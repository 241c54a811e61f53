use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 on line {line}")]
    InvalidUtf8 { path: PathBuf, line: usize },

    #[error("{path}: zero usable lines")]
    EmptyCorpus { path: PathBuf },

    #[error("{path}: {rejected} of {total} lines malformed, above the {threshold} reject threshold")]
    TooManyMalformed {
        path: PathBuf,
        rejected: usize,
        total: usize,
        threshold: f64,
    },

    #[error("invalid language code {0:?}: expected 2-3 lowercase ASCII letters")]
    InvalidLanguage(String),

    #[error("bitext direction {0}-{0} has identical source and target languages")]
    SameLanguagePair(String),

    #[error("no dictionary file found in {dir} for languages {langs}")]
    NoDictionary { dir: PathBuf, langs: String },

    #[error("shard {path} ({lang}) registered twice")]
    DuplicateShard { path: String, lang: String },

    #[error("manifest has no monolingual data")]
    NoMonolingualData,

    #[error("all bucket sizes are zero")]
    AllZero,

    #[error("vocabulary size {size} must exceed the {specials} special tokens")]
    VocabTooSmall { size: usize, specials: usize },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },

    #[error("vocabulary file is malformed: {0}")]
    BadVocab(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bucket {0} is referenced by the sampling plan but holds no data")]
    EmptyBucket(String),

    #[error("packed pairs mix directions {expected} and {found}")]
    MixedDirections { expected: String, found: String },

    #[error("record of {tokens} tokens exceeds the batch budget of {budget}")]
    RecordOverBudget { tokens: usize, budget: usize },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::VocabTooSmall { .. }
                | Error::InvalidLanguage(_)
                | Error::SameLanguagePair(_)
        )
    }
}
