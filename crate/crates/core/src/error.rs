use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text contains no tokens after tokenization")]
    EmptySentence,
    #[error("vocabulary is empty after applying min_count/max_size")]
    EmptyVocabulary,
    #[error("corpus is empty after vocabulary filtering")]
    EmptyCorpus,
    #[error("dataset contains no records")]
    EmptyDataset,
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid UTF-8 on line {line}")]
    Encoding { line: usize },
    #[error("format error on line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("non-finite value encountered during training in epoch {epoch}")]
    NumericalFailure { epoch: usize },
    #[error("non-finite value in input: {0}")]
    NonFinite(String),
    #[error("every token of the sentence is out of vocabulary")]
    AllTokensUnknown,
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("sentence has no in-vocabulary token with neighbors")]
    NoAugmentableToken,
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("training labels contain fewer than two classes")]
    DegenerateLabels,
    #[error("cannot build {k} folds over {records} records")]
    InvalidFoldCount { k: usize, records: usize },
    #[error("{0} is not supported by this classifier")]
    Unsupported(&'static str),
    #[error("validation rows of fold {fold} were modified during arm `{arm}`")]
    ValidationMutated { fold: usize, arm: String },
    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Configuration(message.into())
    }
}
