use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input files (exit code 2).
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Input { path: PathBuf, source: rbwe::Error },

    /// Failure while running an otherwise valid command (exit code 3).
    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Core(#[from] rbwe::Error),

    #[error("{path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Core(e) => match e {
                rbwe::Error::Config(_) | rbwe::Error::Invalid(_) | rbwe::Error::Parse { .. } | rbwe::Error::Checkpoint(_) => 2,
                _ => 3,
            },
            CliError::Runtime(_) | CliError::Output { .. } => 3,
        }
    }

    pub fn input(path: &Path, source: impl Into<rbwe::Error>) -> Self {
        CliError::Input { path: path.to_owned(), source: source.into() }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output { path: path.to_owned(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
