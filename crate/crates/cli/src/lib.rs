//! Command-line front end: datasets, training, resolution sweeps, timing
//! benchmarks and CSV/SVG reports.

pub mod bench;
pub mod commands;
pub mod config;
mod error;
pub mod report;

pub use config::{BenchConfig, RunConfig};
pub use error::{CliError, Result};

/// Caps the global worker pool at `NOPER_THREADS` when it is set.
pub fn init_threads() -> Result<Option<usize>> {
    let Ok(value) = std::env::var("NOPER_THREADS") else { return Ok(None) };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config { key: "NOPER_THREADS".into(), message: format!("expected a positive integer, got {value:?}") })?;
    // A pool that was already built keeps its size; that only happens when
    // the caller set one up first.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(Some(threads))
}
