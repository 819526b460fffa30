use std::path::PathBuf;

use thiserror::Error;

/// Exit status contract: 0 success, 2 usage, 3 parse, 4 numeric, 5 missing artifact.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_MISSING: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("{}: {source}", path.display())]
    At {
        path: PathBuf,
        #[source]
        source: qtkit_core::Error,
    },

    #[error(transparent)]
    Core(#[from] qtkit_core::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn core_code(e: &qtkit_core::Error) -> u8 {
    use qtkit_core::Error as E;
    match e {
        E::Parse { .. } | E::Syntax { .. } | E::Json(_) | E::Csv(_) => EXIT_PARSE,
        E::Numeric(_) => EXIT_NUMERIC,
        E::MissingArtifact(_) => EXIT_MISSING,
        E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
        E::Io(_) | E::Validation(_) | E::ConfigMismatch { .. } => EXIT_USAGE,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::At { source, .. } => core_code(source),
            CliError::Core(e) => core_code(e),
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

/// Attaches the offending path to a core error.
pub trait AtPath<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T, E: Into<qtkit_core::Error>> AtPath<T> for std::result::Result<T, E> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| CliError::At { path: path.into(), source: e.into() })
    }
}
