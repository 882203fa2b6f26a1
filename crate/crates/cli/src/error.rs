use std::path::PathBuf;

use lgc_autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] lgc_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit status: 1 usage/config, 2 data, 3 numeric failure.
impl CliError {
    pub fn exit_code(&self) -> i32 {
        use lgc_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::InvalidModel(_) => 1,
                E::NonFinite { .. } => 3,
                E::Io { .. } | E::Parse { .. } | E::Alignment(_) | E::OutOfRange { .. } | E::InvalidRotation(_) => 2,
                E::Autodiff(a) => match a {
                    AutodiffError::Io(_) | AutodiffError::Checkpoint(_) => 2,
                    _ => 1,
                },
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
