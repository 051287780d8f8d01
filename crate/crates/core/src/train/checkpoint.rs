use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{decode, encode, write_atomic};
use super::dataset::{Dataset, Task};
use super::metrics::Metrics;
use super::trainer::{Normalizer, TrainConfig, TrainedModel};
use crate::diffengine::Value;
use crate::error::{Error, Result};
use crate::operator::{DeepOnet, DeepOnetConfig, Fno, FnoConfig, Model, ModelKind, ParamSet};
use crate::stochastic::GridSpec;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NOPR";
pub const DATASET_MAGIC: &[u8; 4] = b"NOPD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Fno(FnoConfig),
    Deeponet(DeepOnetConfig),
}

impl Architecture {
    pub fn of(model: &Model) -> Self {
        match model {
            Model::Fno(m) => Architecture::Fno(m.config),
            Model::DeepOnet(m) => Architecture::Deeponet(m.config.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub task: Task,
    pub model: ModelKind,
    pub architecture: Architecture,
    pub resolution: usize,
    pub epoch: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub normalizer: Option<Normalizer>,
    pub metrics: Option<Metrics>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, trained: &TrainedModel) -> Self {
        Self { meta, params: trained.model.params().clone() }
    }

    /// Rebuilds the model, checking every stored array against the
    /// architecture's names and shapes.
    pub fn into_trained(self) -> Result<TrainedModel> {
        let mut model = match &self.meta.architecture {
            Architecture::Fno(c) => Model::Fno(Fno::init(*c, 0)?),
            Architecture::Deeponet(c) => Model::DeepOnet(DeepOnet::init(c.clone(), 0)?),
        };
        model.params_mut().assign(self.params)?;
        Ok(TrainedModel { model, normalizer: self.meta.normalizer })
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

fn from_json<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Corrupt(format!("metadata: {e}")))
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let arrays: Vec<(String, &Value)> = checkpoint.params.iter().map(|(n, v)| (n.to_string(), v)).collect();
    let bytes = encode(CHECKPOINT_MAGIC, &to_json(&checkpoint.meta)?, &arrays)?;
    write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let (meta, arrays) = decode(CHECKPOINT_MAGIC, &bytes)?;
    let mut params = ParamSet::new();
    for (name, value) in arrays {
        params.push(name, value);
    }
    Ok(Checkpoint { meta: from_json(meta)?, params })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetMeta {
    task: Task,
    horizon: f64,
    points: usize,
    seed: u64,
    config_hash: Option<String>,
}

pub fn save_dataset(path: &Path, dataset: &Dataset, config_hash: Option<&str>) -> Result<()> {
    let meta = DatasetMeta {
        task: dataset.task,
        horizon: dataset.grid.horizon(),
        points: dataset.grid.points(),
        seed: dataset.seed,
        config_hash: config_hash.map(str::to_string),
    };
    let inputs = Value::Real(dataset.inputs.clone());
    let targets = Value::Real(dataset.targets.clone());
    let bytes = encode(
        DATASET_MAGIC,
        &to_json(&meta)?,
        &[("inputs".to_string(), &inputs), ("targets".to_string(), &targets)],
    )?;
    write_atomic(path, &bytes)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let (meta, arrays) = decode(DATASET_MAGIC, &bytes)?;
    let meta: DatasetMeta = from_json(meta)?;
    let mut real = arrays.into_iter().map(|(name, v)| match v {
        Value::Real(t) => Ok((name, t)),
        _ => Err(Error::Corrupt(format!("{name}: expected a real array"))),
    });
    let (inputs, targets) = match (real.next(), real.next(), real.next()) {
        (Some(a), Some(b), None) => (a?, b?),
        _ => return Err(Error::Corrupt("a dataset holds exactly inputs and targets".into())),
    };
    if inputs.0 != "inputs" || targets.0 != "targets" {
        return Err(Error::Corrupt("dataset arrays must be named inputs and targets".into()));
    }
    let grid = GridSpec::new(meta.horizon, meta.points)?;
    Dataset::new(meta.task, grid, meta.seed, inputs.1, targets.1)
}
