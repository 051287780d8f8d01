use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffengine::Tensor;
use crate::error::{Error, Result};
use crate::sde::{downsample, euler_solve, SdeKind, SdeSpec};
use crate::stochastic::{path_rng, standard_normals, FbmSampler, FbmSpec, GridSpec, PathSample};

/// Horizon of the SDE tasks; resolution 128 gives Δt = 0.1.
pub const SDE_HORIZON: f64 = 12.8;
/// Horizon of the fBM tasks.
pub const FBM_HORIZON: f64 = 1.0;
/// Segments of the fine SDE grid, Δt = 0.1·2⁻⁵ over the SDE horizon.
pub const FINE_SEGMENTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sde1,
    Sde2,
    Fbm25,
    Fbm75,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Sde1, Task::Sde2, Task::Fbm25, Task::Fbm75];

    pub fn name(self) -> &'static str {
        match self {
            Task::Sde1 => "sde1",
            Task::Sde2 => "sde2",
            Task::Fbm25 => "fbm25",
            Task::Fbm75 => "fbm75",
        }
    }

    pub fn sde(self) -> Option<SdeSpec> {
        match self {
            Task::Sde1 => Some(SdeSpec::standard(SdeKind::IntegratedDrift)),
            Task::Sde2 => Some(SdeSpec::standard(SdeKind::IntegratedDiffusion)),
            _ => None,
        }
    }

    pub fn hurst(self) -> Option<f64> {
        match self {
            Task::Fbm25 => Some(0.25),
            Task::Fbm75 => Some(0.75),
            _ => None,
        }
    }

    /// SDE inputs are `[ξ as a constant path, B]`; fBM inputs are `[B]`.
    pub fn in_channels(self) -> usize {
        if self.sde().is_some() {
            2
        } else {
            1
        }
    }

    pub fn horizon(self) -> f64 {
        if self.sde().is_some() {
            SDE_HORIZON
        } else {
            FBM_HORIZON
        }
    }

    pub fn grid(self, resolution: usize) -> Result<GridSpec> {
        GridSpec::with_segments(self.horizon(), resolution)
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown task {s:?}")))
    }
}

/// Input/target pairs on one grid, stored as `[N, d_a, r]` and `[N, 1, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub grid: GridSpec,
    pub seed: u64,
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl Dataset {
    pub fn new(task: Task, grid: GridSpec, seed: u64, inputs: Tensor, targets: Tensor) -> Result<Self> {
        let (n, d, r) = inputs.dims3()?;
        if d != task.in_channels() || r != grid.points() || targets.shape() != [n, 1, r] {
            return Err(Error::Dimension(format!(
                "inputs {:?} and targets {:?} do not fit task {task} on {} points",
                inputs.shape(),
                targets.shape(),
                grid.points()
            )));
        }
        Ok(Self { task, grid, seed, inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolution(&self) -> usize {
        self.grid.segments()
    }

    /// Copies of the listed samples as `(inputs, targets)` tensors.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let r = self.grid.points();
        let d = self.task.in_channels();
        let mut x = Vec::with_capacity(indices.len() * d * r);
        let mut y = Vec::with_capacity(indices.len() * r);
        for &i in indices {
            x.extend_from_slice(&self.inputs.data()[i * d * r..(i + 1) * d * r]);
            y.extend_from_slice(&self.targets.data()[i * r..(i + 1) * r]);
        }
        (
            Tensor::new(vec![indices.len(), d, r], x).expect("shape"),
            Tensor::new(vec![indices.len(), 1, r], y).expect("shape"),
        )
    }

    /// Sample `i` as `(input path, target path)`.
    pub fn sample(&self, i: usize) -> Result<(PathSample, PathSample)> {
        let (x, y) = self.batch(&[i]);
        let d = self.task.in_channels();
        let r = self.grid.points();
        Ok((
            PathSample::new(self.grid, x.reshape(&[d, r])?, self.seed)?,
            PathSample::new(self.grid, y.reshape(&[1, r])?, self.seed)?,
        ))
    }
}

/// Brownian path on `fine_segments` steps for SDE sample `index`, together
/// with its initial value; the draw order is ξ first, then the increments.
pub fn sde_draw(task: Task, seed: u64, index: u64, fine_segments: usize) -> Result<(f64, PathSample)> {
    let spec = task.sde().ok_or_else(|| Error::Domain(format!("{task} is not an SDE task")))?;
    let mut rng = path_rng(seed, index);
    let xi = spec.initial_law.sample(&mut rng);
    let grid = GridSpec::with_segments(task.horizon(), fine_segments)?;
    let z = standard_normals(&mut rng, fine_segments);
    let scale = grid.dt().sqrt();
    let mut b = Vec::with_capacity(fine_segments + 1);
    b.push(0.0);
    let mut acc = 0.0;
    for zi in z {
        acc += scale * zi;
        b.push(acc);
    }
    let path = PathSample::new(grid, Tensor::new(vec![1, fine_segments + 1], b)?, index)?;
    Ok((xi, path))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Smallest multiple of every resolution that is at least [`FINE_SEGMENTS`].
pub fn common_fine_segments(resolutions: &[usize]) -> usize {
    let l = resolutions.iter().fold(1, |acc, &r| lcm(acc, r));
    l * FINE_SEGMENTS.div_ceil(l)
}

fn check_resolutions(resolutions: &[usize]) -> Result<()> {
    if resolutions.is_empty() || resolutions.contains(&0) {
        return Err(Error::Grid("resolutions must be positive and non-empty".into()));
    }
    Ok(())
}

fn assemble(task: Task, seed: u64, resolution: usize, pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Dataset> {
    let grid = task.grid(resolution)?;
    let n = pairs.len();
    let mut x = Vec::with_capacity(n * task.in_channels() * grid.points());
    let mut y = Vec::with_capacity(n * grid.points());
    for (a, b) in pairs {
        x.extend(a);
        y.extend(b);
    }
    Dataset::new(
        task,
        grid,
        seed,
        Tensor::new(vec![n, task.in_channels(), grid.points()], x)?,
        Tensor::new(vec![n, 1, grid.points()], y)?,
    )
}

fn sde_datasets(task: Task, n: usize, resolutions: &[usize], seed: u64, fine: usize) -> Result<Vec<Dataset>> {
    let spec = task.sde().expect("SDE task");
    let per_sample: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (xi, driver) = sde_draw(task, seed, i, fine)?;
            let solution = euler_solve(&spec, xi, &driver)?;
            resolutions
                .iter()
                .map(|&res| {
                    let factor = fine / res;
                    let b = downsample(&driver, factor)?;
                    let x = downsample(&solution.solution, factor)?;
                    let mut input = vec![xi; res + 1];
                    input.extend_from_slice(b.channel(0));
                    Ok((input, x.channel(0).to_vec()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut by_resolution: Vec<Vec<(Vec<f64>, Vec<f64>)>> = resolutions.iter().map(|_| Vec::with_capacity(n)).collect();
    for sample in per_sample {
        for (slot, pair) in by_resolution.iter_mut().zip(sample) {
            slot.push(pair);
        }
    }
    resolutions
        .iter()
        .zip(by_resolution)
        .map(|(&res, pairs)| assemble(task, seed, res, pairs))
        .collect()
}

/// Exact fBM targets paired with their Brownian inputs at one resolution.
/// Each resolution draws its own normals (stream `res·2³² + i`).
fn fbm_dataset(task: Task, n: usize, resolution: usize, seed: u64) -> Result<Dataset> {
    let hurst = task.hurst().expect("fBM task");
    let sampler = FbmSampler::new(FbmSpec::new(hurst, task.grid(resolution)?)?)?;
    let pairs = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng: ChaCha8Rng = path_rng(seed, ((resolution as u64) << 32) | i);
            let (bm, fbm) = sampler.sample_pair_with(&mut rng, i)?;
            Ok((bm.channel(0).to_vec(), fbm.channel(0).to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(task, seed, resolution, pairs)
}

/// `n` samples at `resolution` segments.
///
/// SDE tasks solve on the fine grid of [`FINE_SEGMENTS`] steps and
/// downsample, so `resolution` must divide it.
pub fn build_dataset(task: Task, n: usize, resolution: usize, seed: u64) -> Result<Dataset> {
    check_resolutions(&[resolution])?;
    if task.sde().is_some() {
        if FINE_SEGMENTS % resolution != 0 {
            return Err(Error::Grid(format!(
                "resolution {resolution} does not divide the fine grid of {FINE_SEGMENTS} steps"
            )));
        }
        Ok(sde_datasets(task, n, &[resolution], seed, FINE_SEGMENTS)?.remove(0))
    } else {
        fbm_dataset(task, n, resolution, seed)
    }
}

/// One dataset per resolution. SDE samples share a single fine path per
/// index (a common multiple of all resolutions, at least as fine as
/// [`FINE_SEGMENTS`]), so targets agree across resolutions.
pub fn build_datasets(task: Task, n: usize, resolutions: &[usize], seed: u64) -> Result<Vec<Dataset>> {
    check_resolutions(resolutions)?;
    if task.sde().is_some() {
        sde_datasets(task, n, resolutions, seed, common_fine_segments(resolutions))
    } else {
        resolutions.iter().map(|&r| fbm_dataset(task, n, r, seed)).collect()
    }
}

/// Test sets are drawn under a seed namespace disjoint from training.
pub const TEST_SEED_SALT: u64 = 0x7E57_5EED_0000_0001;

pub fn test_seed(master: u64) -> u64 {
    master ^ TEST_SEED_SALT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fine_grid_choice() {
        assert_eq!(common_fine_segments(&[128]), 4096);
        assert_eq!(common_fine_segments(&[128, 256, 1024]), 4096);
        let l = common_fine_segments(&[128, 160, 192, 256, 320, 384, 512, 640, 832, 1024]);
        assert_eq!(l, 199_680);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("sde3".parse::<Task>().is_err());
    }
}
