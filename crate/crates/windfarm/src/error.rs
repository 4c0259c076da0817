use std::path::PathBuf;

/// Errors surfaced by the library. CLI exit codes: config/io problems map
/// to 1, numerical failures (identification, analysis, simulation blow-up)
/// map to 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("identification error: {0}")]
    Identification(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Read { .. } | Error::Write { .. } | Error::Parse { .. } => 1,
            Error::Identification(_) | Error::Analysis(_) | Error::Numerical(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
