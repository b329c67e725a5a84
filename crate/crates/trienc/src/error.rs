use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: dialog has no utterances")]
    EmptyDialog { line: usize },
    #[error("not an embedding store: magic {found:?}")]
    BadMagic { found: String },
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u32),
    #[error("store does not match its manifest: {0}")]
    ManifestMismatch(String),
    #[error("utterance {index} contains a line break and cannot be indexed")]
    UnindexableUtterance { index: usize },
    #[error("utterance not in store: {0:?}")]
    UnknownUtterance(String),
    #[error(transparent)]
    Core(#[from] trienc_core::Error),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> IoError {
    let path = path.into();
    move |source| IoError::Io { path, source }
}
