use std::path::PathBuf;

/// Errors raised across the discovery, register, and reporting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {context} at record {index}: {message}")]
    Format {
        context: String,
        index: usize,
        message: String,
    },

    #[error("certificate parse error at offset {offset}: {reason}")]
    CertificateParse { offset: usize, reason: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("commit conflict: expected parent {expected:?}, latest is {actual:?}")]
    Conflict { expected: Option<u64>, actual: Option<u64> },

    #[error("register is locked by another writer")]
    Locked,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, index: usize, message: impl ToString) -> Self {
        Error::Format {
            context: context.into(),
            index,
            message: message.to_string(),
        }
    }
}
