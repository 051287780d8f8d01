use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] noper_core::Error),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
