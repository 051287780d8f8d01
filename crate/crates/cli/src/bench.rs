//! Inference-time scaling: generic O(n²) Euler against operator inference.

use std::time::Instant;

use noper_core::diffengine::Tensor;
use noper_core::operator::Model;
use noper_core::sde::{euler_solve_functional, SdeSpec};
use noper_core::stochastic::{sample_brownian, GridSpec, PathSample};
use noper_core::train::{Task, SDE_HORIZON};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::BenchConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub resolution: usize,
    pub batch: usize,
    pub repeats: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Least-squares line through `(ln n, ln t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LogLogFit {
    pub fn new(points: &[(f64, f64)]) -> Self {
        let n = points.len() as f64;
        let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        Self { slope, intercept: my - slope * mx }
    }

    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

/// Resolution where two fitted lines meet, if they are not parallel.
pub fn fitted_crossover(a: &LogLogFit, b: &LogLogFit) -> Option<f64> {
    let ds = a.slope - b.slope;
    (ds.abs() > 1e-12).then(|| ((b.intercept - a.intercept) / ds).exp())
}

fn time_repeats(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<(f64, f64)> {
    f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t0 = Instant::now();
        f()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    let (mean, std) = crate::report::mean_std(&times);
    Ok((mean, std.unwrap_or(0.0)))
}

fn drivers(resolution: usize, batch: usize, seed: u64) -> Result<(Vec<f64>, Vec<PathSample>)> {
    let grid = GridSpec::with_segments(SDE_HORIZON, resolution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ resolution as u64);
    let xi = (0..batch).map(|_| rng.random_range(0.0..20.0)).collect();
    let paths = (0..batch)
        .map(|i| sample_brownian(seed.wrapping_add(i as u64), grid, 1))
        .collect::<noper_core::Result<_>>()?;
    Ok((xi, paths))
}

/// Mean wall time of solving `batch` paths of `spec` with the Euler scheme
/// that re-evaluates the path functional over the whole history each step.
pub fn time_euler(spec: &SdeSpec, resolution: usize, batch: usize, repeats: usize, seed: u64) -> Result<TimingRow> {
    let (xi, paths) = drivers(resolution, batch, seed)?;
    let (drift, diffusion) = spec.functionals();
    let (mean, std) = time_repeats(repeats, || {
        for (x0, b) in xi.iter().zip(&paths) {
            std::hint::black_box(euler_solve_functional(drift.as_ref(), diffusion.as_ref(), *x0, b)?);
        }
        Ok(())
    })?;
    Ok(TimingRow { method: Method::Euler, resolution, batch, repeats, mean_seconds: mean, std_seconds: std })
}

/// Mean wall time of one batched forward pass of `model` on SDE inputs.
pub fn time_operator(model: &Model, resolution: usize, batch: usize, repeats: usize, seed: u64) -> Result<TimingRow> {
    let (xi, paths) = drivers(resolution, batch, seed)?;
    let r = resolution + 1;
    let mut data = Vec::with_capacity(batch * 2 * r);
    for (x0, b) in xi.iter().zip(&paths) {
        data.extend(std::iter::repeat_n(*x0, r));
        data.extend_from_slice(b.channel(0));
    }
    let input = Tensor::new(vec![batch, Task::Sde1.in_channels(), r], data)?;
    let (mean, std) = time_repeats(repeats, || {
        std::hint::black_box(model.predict(&input)?);
        Ok(())
    })?;
    Ok(TimingRow { method: Method::Operator, resolution, batch, repeats, mean_seconds: mean, std_seconds: std })
}

fn time_both(spec: &SdeSpec, model: &Model, n: usize, batch: usize, repeats: usize, seed: u64) -> Result<[TimingRow; 2]> {
    let euler = time_euler(spec, n, batch, repeats, seed)?;
    let operator = time_operator(model, n, batch, repeats, seed)?;
    log::info!("n = {n}: euler {:.3e} s, operator {:.3e} s", euler.mean_seconds, operator.mean_seconds);
    Ok([euler, operator])
}

/// Timings of both methods at every configured resolution, then at
/// doublings of the largest one until the operator is faster or the
/// crossover limit is passed. Runs on a single thread.
pub fn run_bench(spec: &SdeSpec, model: &Model, config: &BenchConfig, seed: u64) -> Result<Vec<TimingRow>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    pool.install(|| {
        let (batch, repeats) = (config.batch, config.repeats);
        let mut rows = Vec::with_capacity(2 * config.resolutions.len());
        for &n in &config.resolutions {
            rows.extend(time_both(spec, model, n, batch, repeats, seed)?);
        }
        let mut n = config.resolutions.iter().copied().max().unwrap_or(0);
        while measured_crossover(&rows).is_none() && 2 * n <= config.crossover_limit {
            n *= 2;
            rows.extend(time_both(spec, model, n, batch, repeats, seed)?);
        }
        Ok(rows)
    })
}

/// Fitted log-log line of `method` over the rows with `lo ≤ n ≤ hi`.
pub fn fit_method(rows: &[TimingRow], method: Method, lo: usize, hi: usize) -> LogLogFit {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == method && (lo..=hi).contains(&r.resolution))
        .map(|r| (r.resolution as f64, r.mean_seconds))
        .collect();
    LogLogFit::new(&points)
}

/// Smallest measured resolution where the operator beats Euler.
pub fn measured_crossover(rows: &[TimingRow]) -> Option<usize> {
    let mut resolutions: Vec<usize> = rows.iter().map(|r| r.resolution).collect();
    resolutions.sort_unstable();
    resolutions.dedup();
    resolutions.into_iter().find(|&n| {
        let t = |m| rows.iter().find(|r| r.method == m && r.resolution == n).map(|r| r.mean_seconds);
        matches!((t(Method::Euler), t(Method::Operator)), (Some(e), Some(o)) if o < e)
    })
}
