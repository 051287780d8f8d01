use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("mode cutoff {cutoff} exceeds the {available} available modes")]
    ModeCutoff { cutoff: usize, available: usize },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("precision error: {0}")]
    Precision(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("resolution error: model expects {expected} grid points, got {got}")]
    Resolution { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported format version {0}")]
    Version(u32),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
