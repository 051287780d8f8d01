//! Run configuration: TOML file, command-line overrides and the hash that
//! tags every artifact.

use std::fs;
use std::path::{Path, PathBuf};

use noper_core::operator::ModelKind;
use noper_core::train::{Task, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Test resolutions of the sweep, in segments.
pub const DEFAULT_RESOLUTIONS: [usize; 10] = [128, 160, 192, 256, 320, 384, 512, 640, 832, 1024];

/// Test samples per resolution.
pub const TEST_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub resolutions: Vec<usize>,
    pub repeats: usize,
    /// Paths per timed call.
    pub batch: usize,
    /// While the operator is still the slower method, resolutions keep
    /// doubling past the fitted range up to this bound.
    pub crossover_limit: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { resolutions: vec![256, 512, 1024, 2048, 4096, 8192], repeats: 10, batch: 4, crossover_limit: 131072 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub models: Vec<ModelKind>,
    /// Training resolution in segments.
    pub resolution: usize,
    pub resolutions: Vec<usize>,
    pub seeds: Vec<u64>,
    pub test_samples: usize,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub train: TrainConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Sde1,
            models: vec![ModelKind::Mfno],
            resolution: 128,
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            seeds: vec![0],
            test_samples: TEST_SAMPLES,
            out: PathBuf::from("runs"),
            checkpoint: None,
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: message.into() }
}

/// Name of the key on the line holding byte `offset` of `source`.
fn key_at(source: &str, offset: usize) -> Option<String> {
    let start = source[..offset.min(source.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = source[start..].lines().next()?;
    let key = line.split('=').next()?.trim().trim_matches('"');
    (!key.is_empty() && !key.starts_with('[')).then(|| key.to_string())
}

/// Key named in an `unknown field` message.
fn unknown_field(message: &str) -> Option<String> {
    let rest = &message[message.find("unknown field `")? + "unknown field `".len()..];
    Some(rest[..rest.find('`')?].to_string())
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(source).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_field(&message)
                .or_else(|| e.span().and_then(|s| key_at(source, s.start)))
                .unwrap_or_else(|| "<document>".into());
            config_error(&key, message)
        })?;
        config.validated()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingFile(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::parse(&source)
    }

    /// Checks ranges and sorts the resolution lists.
    pub fn validated(mut self) -> Result<Self> {
        for (key, list) in [("resolutions", &mut self.resolutions), ("bench.resolutions", &mut self.bench.resolutions)] {
            if list.is_empty() || list.contains(&0) {
                return Err(config_error(key, "needs at least one positive resolution"));
            }
            list.sort_unstable();
            list.dedup();
        }
        if self.resolution == 0 {
            return Err(config_error("resolution", "must be positive"));
        }
        if self.models.is_empty() {
            return Err(config_error("models", "needs at least one model"));
        }
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "needs at least one seed"));
        }
        if self.test_samples == 0 {
            return Err(config_error("test_samples", "must be positive"));
        }
        if self.bench.repeats < 10 {
            return Err(config_error("bench.repeats", format!("must be at least 10, got {}", self.bench.repeats)));
        }
        if self.bench.batch == 0 {
            return Err(config_error("bench.batch", "must be positive"));
        }
        self.train.validate().map_err(|e| config_error("train", e.to_string()))?;
        Ok(self)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Training settings for one seed.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train }
    }
}
