//! The subcommands, as library functions returning the paths they wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use noper_core::operator::{Model, ModelKind};
use noper_core::train::{
    build_dataset, build_datasets, evaluate_model, load_checkpoint, load_dataset, save_checkpoint, save_dataset,
    test_seed, train_model_with, Architecture, Checkpoint, CheckpointMeta, Dataset, Metrics, TrainedModel,
};
use serde::{Deserialize, Serialize};

use crate::bench::{self, Method, TimingRow};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::{self, mean_std, Metric, ReportRow};

pub fn dataset_path(config: &RunConfig, seed: u64) -> PathBuf {
    config.out.join(format!("data_{}_r{}_s{seed}.nopd", config.task, config.resolution))
}

pub fn checkpoint_path(dir: &Path, model: ModelKind, config: &RunConfig, seed: u64) -> PathBuf {
    dir.join(format!("{}_{}_s{seed}.nopr", model.name(), config.task))
}

fn header(config: &RunConfig, extra: &str) -> String {
    let seeds: Vec<String> = config.seeds.iter().map(u64::to_string).collect();
    format!("config_hash={} task={} seeds={} {extra}", config.hash(), config.task, seeds.join(",")).trim_end().into()
}

/// Record of which config hash last used each seed in an output directory.
const SEED_LEDGER: &str = "seeds.json";

/// Warns when a seed in `config` was used in `out` under another config,
/// then records the current hash.
pub fn note_seeds(config: &RunConfig, command: &str) -> Result<Vec<u64>> {
    let path = config.out.join(SEED_LEDGER);
    let mut used: BTreeMap<String, String> = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    let hash = config.hash();
    let mut collisions = Vec::new();
    for &seed in &config.seeds {
        let key = format!("{command}:{}:{seed}", config.task);
        if let Some(previous) = used.get(&key) {
            if *previous != hash {
                log::warn!("seed {seed} was already used for {command} {} in {} under config {previous}", config.task, config.out.display());
                collisions.push(seed);
            }
        }
        used.insert(key, hash.clone());
    }
    fs::write(&path, serde_json::to_string_pretty(&used).expect("map serializes"))?;
    Ok(collisions)
}

/// Writes one training dataset per seed.
pub fn gen_data(config: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&config.out)?;
    note_seeds(config, "gen-data")?;
    let mut written = Vec::new();
    for &seed in &config.seeds {
        let data = build_dataset(config.task, config.train.dataset_size, config.resolution, seed)?;
        let path = dataset_path(config, seed);
        save_dataset(&path, &data, Some(&config.hash()))?;
        log::info!("wrote {} samples to {}", data.len(), path.display());
        written.push(path);
    }
    Ok(written)
}

/// The stored dataset for `seed` when it matches the config, else a fresh one.
fn training_data(config: &RunConfig, seed: u64) -> Result<Dataset> {
    let path = dataset_path(config, seed);
    if path.exists() {
        let data = load_dataset(&path)?;
        if data.len() == config.train.dataset_size && data.task == config.task && data.seed == seed {
            log::info!("using {}", path.display());
            return Ok(data);
        }
    }
    Ok(build_dataset(config.task, config.train.dataset_size, config.resolution, seed)?)
}

fn test_set(config: &RunConfig, resolution: usize, seed: u64) -> Result<Dataset> {
    Ok(build_dataset(config.task, config.test_samples, resolution, test_seed(seed))?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

/// Trains every (model, seed) pair, writing a checkpoint and a loss
/// history per pair.
pub fn train(config: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&config.out)?;
    note_seeds(config, "train")?;
    let mut written = Vec::new();
    for &seed in &config.seeds {
        let data = training_data(config, seed)?;
        let test = test_set(config, config.resolution, seed)?;
        for &kind in &config.models {
            let model = Model::standard(kind, config.task.in_channels(), config.resolution + 1, seed)?;
            let train_config = config.train_for(seed);
            let start = Instant::now();
            let (trained, history) = train_model_with(model, &data, &train_config, |epoch, loss| {
                if epoch % 10 == 0 || epoch + 1 == train_config.epochs {
                    log::info!("{} {} seed {seed}: epoch {epoch} loss {loss:.4e}", kind.name(), config.task);
                }
            })?;
            let metrics = evaluate_model(&trained, &test)?;
            log::info!(
                "{} {} seed {seed}: rel_l2 {:.4e}, rel_linf {:.4e} after {:.1} s",
                kind.name(),
                config.task,
                metrics.rel_l2,
                metrics.rel_linf,
                start.elapsed().as_secs_f64()
            );
            let meta = CheckpointMeta {
                task: config.task,
                model: kind,
                architecture: Architecture::of(&trained.model),
                resolution: config.resolution,
                epoch: train_config.epochs,
                seed,
                train: train_config,
                normalizer: trained.normalizer.clone(),
                metrics: Some(metrics),
                config_hash: Some(config.hash()),
            };
            let path = checkpoint_path(&config.out, kind, config, seed);
            save_checkpoint(&path, &Checkpoint::new(meta, &trained))?;
            let losses: Vec<LossRow> =
                history.iter().enumerate().map(|(epoch, &loss)| LossRow { epoch, loss }).collect();
            let loss_path = path.with_extension("loss.csv");
            report::write_csv(&loss_path, &header(config, &format!("model={} seed={seed}", kind.name())), &losses)?;
            written.push(path);
            written.push(loss_path);
        }
    }
    Ok(written)
}

fn checkpoint_dir(config: &RunConfig) -> &Path {
    config.checkpoint.as_deref().unwrap_or(&config.out)
}

/// Loads the checkpoint of `(kind, seed)`, which must exist.
pub fn load_trained(config: &RunConfig, kind: ModelKind, seed: u64) -> Result<(CheckpointMeta, TrainedModel)> {
    let path = checkpoint_path(checkpoint_dir(config), kind, config, seed);
    if !path.exists() {
        return Err(CliError::MissingFile(path));
    }
    let ckpt = load_checkpoint(&path)?;
    if ckpt.meta.task != config.task || ckpt.meta.model != kind {
        return Err(CliError::Report(format!(
            "{} holds {} {}, expected {} {}",
            path.display(),
            ckpt.meta.model.name(),
            ckpt.meta.task,
            kind.name(),
            config.task
        )));
    }
    let meta = ckpt.meta.clone();
    Ok((meta, ckpt.into_trained()?))
}

fn aggregate(kind: ModelKind, config: &RunConfig, resolution: usize, metrics: &[Metrics], seconds: f64) -> ReportRow {
    let l2: Vec<f64> = metrics.iter().map(|m| m.rel_l2).collect();
    let linf: Vec<f64> = metrics.iter().map(|m| m.rel_linf).collect();
    let (rel_l2_mean, rel_l2_std) = mean_std(&l2);
    let (rel_linf_mean, rel_linf_std) = mean_std(&linf);
    ReportRow {
        model: kind,
        task: config.task,
        resolution,
        rel_l2_mean,
        rel_l2_std,
        rel_linf_mean,
        rel_linf_std,
        seeds: metrics.len(),
        wall_seconds: seconds,
    }
}

/// Evaluates each model at its training resolution.
pub fn eval(config: &RunConfig) -> Result<(PathBuf, Vec<ReportRow>)> {
    fs::create_dir_all(&config.out)?;
    let mut rows = Vec::new();
    for &kind in &config.models {
        let start = Instant::now();
        let mut metrics = Vec::new();
        let mut resolution = config.resolution;
        for &seed in &config.seeds {
            let (meta, trained) = load_trained(config, kind, seed)?;
            resolution = meta.resolution;
            metrics.push(evaluate_model(&trained, &test_set(config, meta.resolution, seed)?)?);
        }
        rows.push(aggregate(kind, config, resolution, &metrics, start.elapsed().as_secs_f64()));
    }
    let path = config.out.join(format!("eval_{}.csv", config.task));
    report::write_csv(&path, &header(config, ""), &rows)?;
    Ok((path, rows))
}

/// Evaluates every checkpoint across the test resolutions without
/// retraining; fixed-grid models are evaluated only where they were trained.
pub fn sweep(config: &RunConfig) -> Result<(Vec<PathBuf>, Vec<ReportRow>)> {
    fs::create_dir_all(&config.out)?;
    let mut trained = Vec::new();
    for &kind in &config.models {
        for &seed in &config.seeds {
            let (meta, model) = load_trained(config, kind, seed)?;
            trained.push((kind, seed, meta, model));
        }
    }
    let mut tests: BTreeMap<u64, Vec<Dataset>> = BTreeMap::new();
    for &seed in &config.seeds {
        tests.insert(seed, build_datasets(config.task, config.test_samples, &config.resolutions, test_seed(seed))?);
    }

    let mut rows = Vec::new();
    for &kind in &config.models {
        for (ri, &res) in config.resolutions.iter().enumerate() {
            let start = Instant::now();
            let mut metrics = Vec::new();
            for (_, seed, meta, model) in trained.iter().filter(|t| t.0 == kind) {
                if kind == ModelKind::Deeponet && res != meta.resolution {
                    log::info!(
                        "skipping deeponet at resolution {res}: it is fixed to its training grid of {}",
                        meta.resolution
                    );
                    continue;
                }
                metrics.push(evaluate_model(model, &tests[seed][ri])?);
            }
            if !metrics.is_empty() {
                rows.push(aggregate(kind, config, res, &metrics, start.elapsed().as_secs_f64()));
            }
        }
    }
    let csv_path = config.out.join(format!("sweep_{}.csv", config.task));
    report::write_csv(&csv_path, &header(config, ""), &rows)?;
    let mut written = vec![csv_path.clone()];
    written.extend(plot_from_csv(&csv_path)?);
    Ok((written, rows))
}

/// Redraws the plots of a sweep CSV next to it.
pub fn plot_from_csv(csv_path: &Path) -> Result<Vec<PathBuf>> {
    let (_, rows): (String, Vec<ReportRow>) = report::read_csv(csv_path)?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep").to_string();
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    let mut tasks: Vec<_> = rows.iter().map(|r| r.task).collect();
    tasks.sort_by_key(|t| t.name());
    tasks.dedup();
    let mut written = Vec::new();
    for task in tasks {
        for metric in Metric::ALL {
            let path = dir.join(format!("{stem}_{}.svg", metric.name()));
            fs::write(&path, report::plot_svg(&rows, task, metric))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Regenerates the plots of every sweep CSV in the output directory.
pub fn report(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut csvs: Vec<PathBuf> = fs::read_dir(&config.out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("sweep_") && name.ends_with(".csv")
        })
        .collect();
    csvs.sort();
    let mut written = Vec::new();
    for csv in csvs {
        written.extend(plot_from_csv(&csv)?);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRow {
    pub method: Method,
    pub slope: f64,
    pub intercept: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub rows: Vec<TimingRow>,
    pub fits: Vec<FitRow>,
    pub measured_crossover: Option<usize>,
    pub fitted_crossover: Option<f64>,
}

/// Times Euler and MFNO inference; uses the first seed's MFNO checkpoint
/// when one exists, else a freshly initialized network of the same shape.
pub fn bench_time(config: &RunConfig) -> Result<(Vec<PathBuf>, BenchSummary)> {
    fs::create_dir_all(&config.out)?;
    let spec = config
        .task
        .sde()
        .ok_or_else(|| CliError::Config { key: "task".into(), message: "bench-time needs an SDE task".into() })?;
    let seed = config.seeds[0];
    let model = match load_trained(config, ModelKind::Mfno, seed) {
        Ok((_, t)) => t.model,
        Err(CliError::MissingFile(p)) => {
            log::info!("no checkpoint at {}; timing an untrained network", p.display());
            Model::standard(ModelKind::Mfno, config.task.in_channels(), config.resolution + 1, seed)?
        }
        Err(e) => return Err(e),
    };
    let b = &config.bench;
    let rows = bench::run_bench(&spec, &model, b, seed)?;
    let (lo, hi) = (b.resolutions[0], *b.resolutions.last().expect("non-empty"));
    let fits: Vec<FitRow> = [Method::Euler, Method::Operator]
        .into_iter()
        .map(|m| {
            let f = bench::fit_method(&rows, m, lo, hi);
            FitRow { method: m, slope: f.slope, intercept: f.intercept, from: lo, to: hi }
        })
        .collect();
    let as_fit = |r: &FitRow| bench::LogLogFit { slope: r.slope, intercept: r.intercept };
    let summary = BenchSummary {
        measured_crossover: bench::measured_crossover(&rows),
        fitted_crossover: bench::fitted_crossover(&as_fit(&fits[0]), &as_fit(&fits[1])),
        rows,
        fits,
    };
    let extra = format!("batch={} repeats={}", b.batch, b.repeats);
    let times = config.out.join("bench_time.csv");
    report::write_csv(&times, &header(config, &extra), &summary.rows)?;
    let fit_path = config.out.join("bench_fit.csv");
    report::write_csv(&fit_path, &header(config, &extra), &summary.fits)?;
    Ok((vec![times, fit_path], summary))
}
