//! Euler schemes for SDEs whose coefficients depend on the running integral
//! of the solution, plus a closed form for the noiseless case and grid
//! downsampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffengine::Tensor;
use crate::error::{Error, Result};
use crate::stochastic::{GridSpec, PathSample};

/// Which coefficient carries the running integral `α + β∫₀ᵗ X ds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeKind {
    /// `dX = (α + β∫X) dt + σ dB`
    IntegratedDrift,
    /// `dX = μ dt + (α + β∫X) dB`
    IntegratedDiffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl Default for SdeParams {
    fn default() -> Self {
        Self { mu: 3.0, alpha: 0.1, beta: 0.03, sigma: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialLaw {
    Uniform { lo: f64, hi: f64 },
    Fixed(f64),
}

impl InitialLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
            InitialLaw::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeSpec {
    pub kind: SdeKind,
    pub params: SdeParams,
    pub initial_law: InitialLaw,
}

impl SdeSpec {
    /// μ = 3, α = 0.1, β = 0.03, σ = 2 and ξ ~ U(0, 20).
    pub fn standard(kind: SdeKind) -> Self {
        Self {
            kind,
            params: SdeParams::default(),
            initial_law: InitialLaw::Uniform { lo: 0.0, hi: 20.0 },
        }
    }

    /// Drift and diffusion as generic history functionals, re-summing the
    /// integral from scratch at every step.
    pub fn functionals(&self) -> (Box<dyn PathFunctional>, Box<dyn PathFunctional>) {
        let p = self.params;
        let integral = Box::new(RunningIntegral { offset: p.alpha, slope: p.beta });
        match self.kind {
            SdeKind::IntegratedDrift => (integral, Box::new(Constant(p.sigma))),
            SdeKind::IntegratedDiffusion => (Box::new(Constant(p.mu)), integral),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostClass {
    /// O(1) work per step.
    RunningIntegral,
    /// O(j) work at step j.
    Generic,
}

/// Non-anticipative functional of the solution history: `history` holds
/// `X(t_0), …, X(t_j)` and nothing later.
pub trait PathFunctional: Send + Sync {
    fn eval(&self, j: usize, history: &[f64], grid: &GridSpec) -> f64;
    fn cost_class(&self) -> CostClass;
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl PathFunctional for Constant {
    fn eval(&self, _: usize, _: &[f64], _: &GridSpec) -> f64 {
        self.0
    }

    fn cost_class(&self) -> CostClass {
        CostClass::RunningIntegral
    }
}

/// `offset + slope·Σ_{i≤j} X(t_i)Δt`, recomputed over the full history.
#[derive(Debug, Clone, Copy)]
pub struct RunningIntegral {
    pub offset: f64,
    pub slope: f64,
}

impl PathFunctional for RunningIntegral {
    fn eval(&self, _: usize, history: &[f64], grid: &GridSpec) -> f64 {
        self.offset + self.slope * history.iter().sum::<f64>() * grid.dt()
    }

    fn cost_class(&self) -> CostClass {
        CostClass::Generic
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSample {
    pub xi: f64,
    pub driver: PathSample,
    pub solution: PathSample,
}

fn driver_values(driver: &PathSample) -> Result<&[f64]> {
    if driver.channels() != 1 {
        return Err(Error::Dimension(format!(
            "driver must have one channel, got {}",
            driver.channels()
        )));
    }
    Ok(driver.channel(0))
}

fn finish(xi: f64, driver: &PathSample, x: Vec<f64>) -> Result<SolutionSample> {
    let r = x.len();
    let solution = PathSample::new(driver.grid, Tensor::new(vec![1, r], x)?, driver.seed)?;
    Ok(SolutionSample { xi, driver: driver.clone(), solution })
}

/// Euler scheme with the integral kept as a running left-endpoint sum
/// `Σ_{i=0}^{j} X(t_i)Δt`, O(r) in total.
pub fn euler_solve(spec: &SdeSpec, xi: f64, driver: &PathSample) -> Result<SolutionSample> {
    let b = driver_values(driver)?;
    let dt = driver.grid.dt();
    let p = spec.params;
    let mut x = Vec::with_capacity(b.len());
    x.push(xi);
    let mut integral = 0.0;
    for j in 0..b.len() - 1 {
        let xj = x[j];
        integral += xj * dt;
        let coeff = p.alpha + p.beta * integral;
        let db = b[j + 1] - b[j];
        let next = match spec.kind {
            SdeKind::IntegratedDrift => xj + coeff * dt + p.sigma * db,
            SdeKind::IntegratedDiffusion => xj + p.mu * dt + coeff * db,
        };
        x.push(next);
    }
    finish(xi, driver, x)
}

/// Euler scheme evaluating both coefficients on the stored history at each
/// step; O(r²) when either functional is generic.
pub fn euler_solve_functional(
    drift: &dyn PathFunctional,
    diffusion: &dyn PathFunctional,
    xi: f64,
    driver: &PathSample,
) -> Result<SolutionSample> {
    let b = driver_values(driver)?;
    let grid = driver.grid;
    let dt = grid.dt();
    let mut x = Vec::with_capacity(b.len());
    x.push(xi);
    for j in 0..b.len() - 1 {
        let history = &x[..=j];
        let step = drift.eval(j, history, &grid) * dt + diffusion.eval(j, history, &grid) * (b[j + 1] - b[j]);
        x.push(x[j] + step);
    }
    finish(xi, driver, x)
}

/// `ξ·cosh(√β t) + (α/√β)·sinh(√β t)`: the integrated-drift equation with
/// σ = 0 reduces to `X'' = βX`, `X(0) = ξ`, `X'(0) = α`.
pub fn closed_form_reference(kind: SdeKind, xi: f64, alpha: f64, beta: f64, t: f64) -> Result<f64> {
    if kind != SdeKind::IntegratedDrift {
        return Err(Error::Domain("closed form exists only for the integrated-drift equation".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("closed form needs beta > 0, got {beta}")));
    }
    let k = beta.sqrt();
    Ok(xi * (k * t).cosh() + alpha / k * (k * t).sinh())
}

/// Keeps every `factor`-th sample, both endpoints included.
pub fn downsample(path: &PathSample, factor: usize) -> Result<PathSample> {
    let segments = path.grid.segments();
    if factor == 0 || segments % factor != 0 {
        return Err(Error::Grid(format!("cannot downsample {segments} segments by {factor}")));
    }
    let grid = GridSpec::with_segments(path.grid.horizon(), segments / factor)?;
    let r = grid.points();
    let mut values = Vec::with_capacity(path.channels() * r);
    for c in 0..path.channels() {
        values.extend(path.channel(c).iter().step_by(factor));
    }
    PathSample::new(grid, Tensor::new(vec![path.channels(), r], values)?, path.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::sample_brownian;

    fn driver(seed: u64, segments: usize) -> PathSample {
        sample_brownian(seed, GridSpec::with_segments(12.8, segments).unwrap(), 1).unwrap()
    }

    fn spec(kind: SdeKind, alpha: f64, beta: f64, sigma: f64) -> SdeSpec {
        SdeSpec {
            kind,
            params: SdeParams { mu: 3.0, alpha, beta, sigma },
            initial_law: InitialLaw::Fixed(1.0),
        }
    }

    #[test]
    fn noiseless_linear_drift_telescopes() {
        let d = driver(1, 128);
        let s = euler_solve(&spec(SdeKind::IntegratedDrift, 0.1, 0.0, 0.0), 4.0, &d).unwrap();
        for (j, &x) in s.solution.channel(0).iter().enumerate() {
            assert!((x - (4.0 + 0.1 * d.grid.time(j))).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_noise_telescopes() {
        let d = driver(2, 128);
        let s = euler_solve(&spec(SdeKind::IntegratedDrift, 0.1, 0.0, 2.0), 4.0, &d).unwrap();
        assert_eq!(s.solution.channel(0)[0], 4.0);
        for (j, &x) in s.solution.channel(0).iter().enumerate() {
            let expect = 4.0 + 0.1 * d.grid.time(j) + 2.0 * d.channel(0)[j];
            assert!((x - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_values() {
        let v = closed_form_reference(SdeKind::IntegratedDrift, 1.0, 0.0, 1.0, 1.0).unwrap();
        // cosh(1) = Σ 1/(2k)!
        let series: f64 = (0..12).map(|k| 1.0 / (1..=2 * k).map(|i| i as f64).product::<f64>()).sum();
        assert!((v - series).abs() < 1e-15);
        assert!((v - 1.543_080_6).abs() < 1e-7);
        assert_eq!(closed_form_reference(SdeKind::IntegratedDrift, 2.5, 0.1, 0.03, 0.0).unwrap(), 2.5);
        let h = 1e-5;
        let f = |t| closed_form_reference(SdeKind::IntegratedDrift, 1.0, 0.1, 0.03, t).unwrap();
        let slope = (f(h) - f(-h)) / (2.0 * h);
        assert!(((slope - 0.1) / 0.1).abs() < 1e-6);
        assert!(closed_form_reference(SdeKind::IntegratedDrift, 1.0, 0.1, 0.0, 1.0).is_err());
        assert!(closed_form_reference(SdeKind::IntegratedDiffusion, 1.0, 0.1, 0.03, 1.0).is_err());
    }

    #[test]
    fn fast_and_generic_schemes_agree() {
        for kind in [SdeKind::IntegratedDrift, SdeKind::IntegratedDiffusion] {
            let s = SdeSpec::standard(kind);
            let (drift, diffusion) = s.functionals();
            for segments in [16, 128, 511] {
                let d = driver(segments as u64, segments);
                let fast = euler_solve(&s, 13.0, &d).unwrap();
                let slow = euler_solve_functional(drift.as_ref(), diffusion.as_ref(), 13.0, &d).unwrap();
                for (a, b) in fast.solution.channel(0).iter().zip(slow.solution.channel(0)) {
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{kind:?} {segments}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn downsample_index_arithmetic() {
        let g = GridSpec::new(1.0, 5).unwrap();
        let p = PathSample::new(g, Tensor::new(vec![1, 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(), 0).unwrap();
        assert_eq!(downsample(&p, 1).unwrap(), p);
        let d = downsample(&p, 2).unwrap();
        assert_eq!(d.channel(0), &[0.0, 2.0, 4.0]);
        assert!((d.grid.dt() - 0.5).abs() < 1e-15);
        assert!(matches!(downsample(&p, 3), Err(Error::Grid(_))));
        let b = driver(5, 64);
        assert_eq!(downsample(&downsample(&b, 2).unwrap(), 2).unwrap(), downsample(&b, 4).unwrap());
    }

    #[test]
    fn multichannel_driver_rejected() {
        let d = sample_brownian(1, GridSpec::new(1.0, 5).unwrap(), 2).unwrap();
        let s = SdeSpec::standard(SdeKind::IntegratedDrift);
        assert!(matches!(euler_solve(&s, 1.0, &d), Err(Error::Dimension(_))));
    }
}
