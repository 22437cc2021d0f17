use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Numerical(xychain::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<xychain::Error> for CliError {
    fn from(e: xychain::Error) -> Self {
        match e {
            xychain::Error::Domain(msg) => CliError::Config(msg),
            other => CliError::Numerical(other),
        }
    }
}
