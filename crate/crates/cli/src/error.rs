use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad command line or configuration value.
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// Malformed or inconsistent input file.
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Core {
        path: PathBuf,
        #[source]
        source: xltag_core::Error,
    },
    #[error(transparent)]
    Compute(#[from] xltag_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn core(path: impl Into<PathBuf>, source: xltag_core::Error) -> Self {
        Error::Core {
            path: path.into(),
            source,
        }
    }

    /// 1 for usage and configuration errors, 2 for data errors, 3 for
    /// numerical divergence.
    pub fn exit_code(&self) -> i32 {
        use xltag_core::Error as E;
        match self {
            Error::Config(_) => 1,
            Error::Io { .. } | Error::Data { .. } => 2,
            Error::Core { source, .. } | Error::Compute(source) => match source {
                E::Divergence { .. } => 3,
                E::Config(_) => 1,
                _ => 2,
            },
        }
    }
}
