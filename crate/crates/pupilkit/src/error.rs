//! Error type shared by the whole crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A network configuration name that is not one of the five known ones.
    #[error("unknown network configuration `{0}` (expected CK8P8, CK8P16, CK16P32, FINE or SK8P8)")]
    UnknownConfig(String),

    /// Input dimensions incompatible with the operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A precondition on argument values failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Model stream does not start with the expected magic bytes.
    #[error("bad magic: not a PNETv1 model stream")]
    BadMagic,

    /// Model stream ended before all declared data was read.
    #[error("truncated stream: expected {expected} more bytes")]
    TruncatedStream { expected: usize },

    /// Image file uses a format or pixel layout the loader does not accept.
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    /// Image file is syntactically broken or ends early.
    #[error("truncated or corrupt image file: {0}")]
    TruncatedFile(String),

    /// A manifest line failed to parse or referenced bad data.
    #[error("manifest {path}, line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Training diverged (non-finite loss).
    #[error("training aborted: non-finite loss at round {round}, epoch {epoch} (learning rate {lr}); the learning rate is likely too high")]
    NonFiniteLoss { round: usize, epoch: usize, lr: f64 },

    /// Underlying I/O failure.
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
