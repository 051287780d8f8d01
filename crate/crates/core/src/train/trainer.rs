use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::{mean_errors, Metrics};
use super::optim::{AdamW, StepDecay};
use crate::diffengine::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::operator::Model;
use crate::stochastic::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    /// Epochs between learning-rate decays.
    pub lr_step: usize,
    pub lr_gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dataset_size: usize,
    pub seed: u64,
    /// Standardize input channels and targets with training-set statistics.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            weight_decay: 3e-3,
            lr_step: 100,
            lr_gamma: 0.9,
            epochs: 500,
            batch_size: 32,
            dataset_size: 1024,
            seed: 0,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("lr", self.lr), ("lr_gamma", self.lr_gamma)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Domain(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        for (name, v) in [
            ("lr_step", self.lr_step),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("dataset_size", self.dataset_size),
        ] {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> StepDecay {
        StepDecay { initial: self.lr, step: self.lr_step, gamma: self.lr_gamma }
    }
}

/// Per-channel affine standardization of inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn moments(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        sum += v;
        sq += v * v;
    }
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

impl Normalizer {
    pub fn fit(dataset: &Dataset) -> Self {
        let (_, d, r) = dataset.inputs.dims3().expect("rank 3");
        let x = dataset.inputs.data();
        let (input_mean, input_std) = (0..d)
            .map(|c| moments(x.chunks(r).skip(c).step_by(d).flatten().copied()))
            .unzip();
        let (target_mean, target_std) = moments(dataset.targets.data().iter().copied());
        Self { input_mean, input_std, target_mean, target_std }
    }

    pub fn inputs(&self, x: &Tensor) -> Tensor {
        let (_, d, r) = x.dims3().expect("rank 3");
        let mut out = x.clone();
        for (row, chunk) in out.data_mut().chunks_mut(r).enumerate() {
            let c = row % d;
            let (m, s) = (self.input_mean[c], self.input_std[c]);
            chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        out
    }

    pub fn targets(&self, y: &Tensor) -> Tensor {
        let mut out = y.clone();
        out.data_mut().iter_mut().for_each(|v| *v = (*v - self.target_mean) / self.target_std);
        out
    }

    pub fn restore(&self, y: &Tensor) -> Tensor {
        let mut out = y.clone();
        out.data_mut().iter_mut().for_each(|v| *v = *v * self.target_std + self.target_mean);
        out
    }
}

/// A model together with the data scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub normalizer: Option<Normalizer>,
}

/// Samples per forward pass when predicting.
const PREDICT_CHUNK: usize = 32;

impl TrainedModel {
    pub fn predict(&self, inputs: &Tensor) -> Result<Tensor> {
        let (n, d, r) = inputs.dims3()?;
        let mut out = Vec::with_capacity(n * r);
        for chunk in inputs.data().chunks(PREDICT_CHUNK * d * r) {
            let x = Tensor::new(vec![chunk.len() / (d * r), d, r], chunk.to_vec())?;
            let y = match &self.normalizer {
                Some(norm) => norm.restore(&self.model.predict(&norm.inputs(&x))?),
                None => self.model.predict(&x)?,
            };
            out.extend(y.into_data());
        }
        Tensor::new(vec![n, 1, r], out)
    }
}

/// Mean per-sample relative ℓ² and ℓ∞ errors on `dataset`.
pub fn evaluate_model(model: &TrainedModel, dataset: &Dataset) -> Result<Metrics> {
    if dataset.is_empty() {
        return Err(Error::Metric("empty dataset".into()));
    }
    let pred = model.predict(&dataset.inputs)?;
    mean_errors(&pred, &dataset.targets)
}

/// Epoch `epoch`'s visiting order of `n` samples.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut path_rng(seed, epoch as u64));
    order
}

/// Minibatch training with AdamW and step decay; returns the model and
/// the mean loss of every epoch.
pub fn train_model(model: Model, dataset: &Dataset, config: &TrainConfig) -> Result<(TrainedModel, Vec<f64>)> {
    train_model_with(model, dataset, config, |_, _| {})
}

/// [`train_model`] with a callback receiving `(epoch, mean loss)`.
pub fn train_model_with(
    mut model: Model,
    dataset: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(TrainedModel, Vec<f64>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Dimension("cannot train on an empty dataset".into()));
    }
    let normalizer = config.normalize.then(|| Normalizer::fit(dataset));
    let (inputs, targets) = match &normalizer {
        Some(n) => (n.inputs(&dataset.inputs), n.targets(&dataset.targets)),
        None => (dataset.inputs.clone(), dataset.targets.clone()),
    };
    let scaled = Dataset { inputs, targets, ..dataset.clone() };
    let schedule = config.schedule();
    let mut optimizer = AdamW::new(model.params(), config.weight_decay);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = schedule.rate(epoch);
        let mut total = 0.0;
        for batch in epoch_order(scaled.len(), config.seed, epoch).chunks(config.batch_size) {
            let (x, y) = scaled.batch(batch);
            let mut tape = Tape::new();
            let vars = model.params().register(&mut tape);
            let input = tape.constant(x);
            let pred = model.forward(&mut tape, &vars, input)?;
            let loss = tape.mse(pred, &y)?;
            let value = tape.tensor(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, loss: value });
            }
            total += value * batch.len() as f64;
            let grads = tape.backward(loss, None)?;
            optimizer.step(model.params_mut(), &grads, lr);
        }
        let mean = total / scaled.len() as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok((TrainedModel { model, normalizer }, history))
}
