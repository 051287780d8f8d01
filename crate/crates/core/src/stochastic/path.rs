use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffengine::Tensor;
use crate::error::{Error, Result};

/// Uniform time grid `t_j = j·T/(r−1)`, `j = 0..r`, both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    horizon: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Grid(format!("a grid needs at least 2 points, got {points}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Grid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { horizon, points })
    }

    /// Grid with `segments` equal steps on `[0, horizon]`.
    pub fn with_segments(horizon: f64, segments: usize) -> Result<Self> {
        Self::new(horizon, segments + 1)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn segments(&self) -> usize {
        self.points - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.segments() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.segments() {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.time(j)).collect()
    }
}

/// Multi-channel path values on a grid; `values` has shape `(channels, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: GridSpec,
    pub values: Tensor,
    pub seed: u64,
}

impl PathSample {
    pub fn new(grid: GridSpec, values: Tensor, seed: u64) -> Result<Self> {
        let (_, r) = values.dims2()?;
        if r != grid.points() {
            return Err(Error::Grid(format!(
                "path has {r} samples but the grid has {} points",
                grid.points()
            )));
        }
        if !values.is_finite() {
            return Err(Error::Domain("path values must be finite".into()));
        }
        Ok(Self { grid, values, seed })
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let r = self.grid.points();
        &self.values.data()[c * r..(c + 1) * r]
    }
}

/// Deterministic generator for the `index`-th path under `master` seed.
///
/// Each index gets its own ChaCha stream, so results do not depend on the
/// order in which paths are generated.
pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Brownian motion on `grid` with `dims` independent channels.
pub fn sample_brownian(seed: u64, grid: GridSpec, dims: usize) -> Result<PathSample> {
    if dims == 0 {
        return Err(Error::Dimension("Brownian motion needs at least one channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = grid.points();
    let scale = grid.dt().sqrt();
    let mut values = Vec::with_capacity(dims * r);
    for _ in 0..dims {
        let z = standard_normals(&mut rng, r - 1);
        values.push(0.0);
        let mut acc = 0.0;
        for zi in z {
            acc += scale * zi;
            values.push(acc);
        }
    }
    PathSample::new(grid, Tensor::new(vec![dims, r], values)?, seed)
}

/// Value of the piecewise-linear interpolant of `path` at time `t`.
pub fn eval_piecewise_linear(path: &PathSample, t: f64) -> Result<Vec<f64>> {
    let grid = path.grid;
    if !(0.0..=grid.horizon()).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", grid.horizon())));
    }
    let pos = t / grid.dt();
    let i = (pos.floor() as usize).min(grid.segments() - 1);
    let (t0, t1) = (grid.time(i), grid.time(i + 1));
    Ok((0..path.channels())
        .map(|c| {
            let v = path.channel(c);
            if t == t0 {
                v[i]
            } else if t == t1 {
                v[i + 1]
            } else {
                v[i] + (v[i + 1] - v[i]) / (t1 - t0) * (t - t0)
            }
        })
        .collect())
}

/// `‖(Bⁿ)'‖²_{L²}` of the interpolant: Σ over segments of slope²·Δt, summed
/// over channels.
pub fn h1_seminorm_sq(path: &PathSample) -> f64 {
    let dt = path.grid.dt();
    (0..path.channels())
        .map(|c| path.channel(c).windows(2).map(|w| (w[1] - w[0]).powi(2) / dt).sum::<f64>())
        .sum()
}
