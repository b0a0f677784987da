use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: inpaint_core::Error },
    #[error(transparent)]
    Core(#[from] inpaint_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for scorer failures, 4 for
    /// internal faults.
    pub fn exit_code(&self) -> i32 {
        use inpaint_core::Error as E;
        match self {
            Error::Core(E::Scorer { .. }) => 3,
            Error::Core(E::Internal(_)) => 4,
            _ => 2,
        }
    }
}
