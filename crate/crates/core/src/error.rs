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

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate comment_id {0:?}")]
    DuplicateCommentId(String),

    #[error("cannot derive labels for profile {0:?}: no death_time")]
    CannotDerive(String),

    #[error("stored label conflicts with death_time for comment {0:?}")]
    LabelConflict(String),

    #[error("document {0:?} has no label")]
    Unlabeled(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature space mismatch: {0}")]
    FeatureSpaceMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("unsupported model format_version {0}")]
    UnsupportedVersion(u32),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
