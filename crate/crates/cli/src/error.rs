use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {detail}", path.display())]
    Malformed { path: PathBuf, detail: String },
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] inkmorph::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a file path to a library error raised while handling it.
    pub fn at(path: impl Into<PathBuf>, err: inkmorph::Error) -> Self {
        match err {
            inkmorph::Error::Io(source) => Self::io(path, source),
            inkmorph::Error::Format(detail) => Self::Malformed {
                path: path.into(),
                detail: format!("malformed image: {detail}"),
            },
            other => Self::Core(other),
        }
    }

    /// 0 success, 1 validation, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 1,
            Self::Io { .. } | Self::Malformed { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Core(e) => match e {
                inkmorph::Error::InvalidArgument(_) | inkmorph::Error::ContractViolation(_) => 1,
                inkmorph::Error::Format(_) | inkmorph::Error::Io(_) => 2,
                inkmorph::Error::Numerical { .. } => 3,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
