use std::path::PathBuf;

use thiserror::Error;

/// Coarse error class, used by the command line to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("batch norm in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("cache does not belong to a {0} layer")]
    CacheMismatch(&'static str),
    #[error("triplet mining needs at least two identities ({0})")]
    SingleIdentity(&'static str),
    #[error("anchor row {0} has no positive candidate")]
    NoPositive(usize),
    #[error("batch has no {0} rows")]
    MissingModality(&'static str),
    #[error("invalid batch layout: {0}")]
    InvalidBatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("need {needed} identities with both modalities, only {available} available")]
    InsufficientIdentities { needed: usize, available: usize },
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("ranked list has no relevant item")]
    NoRelevant,
    #[error("identity {0} has no gallery sample")]
    MissingGalleryIdentity(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Usage,
            Error::Parse { .. }
            | Error::EmptyDataset
            | Error::InvalidDataset(_)
            | Error::InsufficientIdentities { .. }
            | Error::MissingGalleryIdentity(_)
            | Error::EmptyGallery
            | Error::Checkpoint(_)
            | Error::Io { .. } => ErrorKind::Data,
            Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Numeric,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
