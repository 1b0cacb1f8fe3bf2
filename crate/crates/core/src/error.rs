use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checksum mismatch in {file}: recorded {expected:08x}, computed {found:08x}")]
    Checksum {
        file: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("unsupported format version {found} in {file} (reader supports {expected})")]
    Version {
        file: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("truncated {file}: {detail}")]
    Truncated { file: PathBuf, detail: String },

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("class {0} is missing from the training split")]
    MissingClass(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("no model registered for motion {0}")]
    UnknownMotion(String),

    #[error("output directory {0} exists and is not empty")]
    NonEmptyOutput(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
