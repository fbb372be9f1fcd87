use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Process exit status of a failed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Failure = 1,
    Io = 2,
    Format = 3,
    Missing = 4,
    Gradcheck = 5,
    Mismatch = 6,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<ExitKind> for ExitCode {
    fn from(kind: ExitKind) -> Self {
        ExitCode::from(kind.code())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Missing(String),
    #[error("{0}")]
    Gradcheck(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] fdmask::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        if source.kind() == std::io::ErrorKind::NotFound {
            return CliError::Missing(format!("{}: not found", path.display()));
        }
        CliError::Io { path, source }
    }

    /// Write-side I/O failure; always exit code 2.
    pub fn write(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn with_context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Format(m) => CliError::Format(format!("{what}: {m}")),
            CliError::Missing(m) => CliError::Missing(format!("{what}: {m}")),
            CliError::Mismatch(m) => CliError::Mismatch(format!("{what}: {m}")),
            other => other,
        }
    }

    pub fn exit_kind(&self) -> ExitKind {
        use fdmask::Error as E;
        match self {
            CliError::Io { .. } => ExitKind::Io,
            CliError::Format(_) => ExitKind::Format,
            CliError::Missing(_) => ExitKind::Missing,
            CliError::Gradcheck(_) => ExitKind::Gradcheck,
            CliError::Mismatch(_) => ExitKind::Mismatch,
            CliError::Core(e) => match e {
                E::Shape { .. } | E::Index { .. } | E::Argument(_) | E::Contract(_) | E::Spec(_) => ExitKind::Format,
                E::Config(_) => ExitKind::Mismatch,
                E::Divergence { .. } => ExitKind::Failure,
            },
        }
    }
}

impl From<crate::container::DecodeError> for CliError {
    fn from(e: crate::container::DecodeError) -> Self {
        CliError::Format(e.to_string())
    }
}
