//! Fractional Brownian motion: exact Cholesky sampling paired with the
//! Brownian path built from the same normals, and the piecewise-linear
//! kernel approximation `Wⁿ(t) = Σ_i [(1/Δt)∫_{t_i}^{t_{i+1}} K_H(t,s) ds]·ΔB_i`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::path::{standard_normals, GridSpec, PathSample};
use super::special::{gauss_legendre_32, kernel_kh, kernel_variance_factor};
use crate::diffengine::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmSpec {
    hurst: f64,
    grid: GridSpec,
}

impl FbmSpec {
    pub fn new(hurst: f64, grid: GridSpec) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::Domain(format!("Hurst index must lie in (0, 1), got {hurst}")));
        }
        Ok(Self { hurst, grid })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }
}

/// `C(i,j) = ½(t_i^{2H} + t_j^{2H} − |t_i − t_j|^{2H})` over `t_1..t_{r−1}`.
pub fn fbm_covariance(spec: &FbmSpec) -> Array2<f64> {
    let times = spec.grid.times();
    let t = &times[1..];
    let two_h = 2.0 * spec.hurst;
    let n = t.len();
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        c[[i, i]] = t[i].powf(two_h);
        for j in 0..i {
            let v = 0.5 * (t[i].powf(two_h) + t[j].powf(two_h) - (t[i] - t[j]).abs().powf(two_h));
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    c
}

fn cholesky_once(c: &Array2<f64>, jitter: f64, floor: f64) -> std::result::Result<Array2<f64>, (usize, f64)> {
    let n = c.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = c[[j, j]] + jitter;
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) {
            return Err((j, d));
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in j + 1..n {
            let mut s = c[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Lower-triangular `L` with `L·Lᵀ = C`.
///
/// A pivot below `1e-12·trace(C)/n` triggers one retry with
/// `1e-10·trace(C)/n` added to the diagonal.
pub fn cholesky_factorize(c: &Array2<f64>) -> Result<Array2<f64>> {
    let n = c.nrows();
    if n == 0 || c.ncols() != n {
        return Err(Error::Dimension(format!("expected a square matrix, got {:?}", c.shape())));
    }
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (c[[i, j]] - c[[j, i]]).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mean_diag = c.diag().sum() / n as f64;
    let floor = 1e-12 * mean_diag;
    match cholesky_once(c, 0.0, floor) {
        Ok(l) => Ok(l),
        Err(_) => cholesky_once(c, 1e-10 * mean_diag, floor)
            .map_err(|(pivot, value)| Error::NotPositiveDefinite { pivot, value }),
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    pub c: Array2<f64>,
    pub l: Array2<f64>,
}

impl CovarianceFactor {
    pub fn new(spec: &FbmSpec) -> Result<Self> {
        let c = fbm_covariance(spec);
        let l = cholesky_factorize(&c)?;
        Ok(Self { c, l })
    }
}

/// Reusable sampler for (Brownian, fBM) pairs sharing one set of normals.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    spec: FbmSpec,
    factor: CovarianceFactor,
}

impl FbmSampler {
    pub fn new(spec: FbmSpec) -> Result<Self> {
        Ok(Self { spec, factor: CovarianceFactor::new(&spec)? })
    }

    pub fn spec(&self) -> &FbmSpec {
        &self.spec
    }

    pub fn factor(&self) -> &CovarianceFactor {
        &self.factor
    }

    /// `bm = cumsum(√Δt·z)`, `fbm = L·z`, both zero at `t = 0`.
    pub fn pair_from_normals(&self, z: &[f64], seed: u64) -> Result<(PathSample, PathSample)> {
        let grid = self.spec.grid;
        let n = grid.segments();
        if z.len() != n {
            return Err(Error::Dimension(format!("expected {n} normals, got {}", z.len())));
        }
        let scale = grid.dt().sqrt();
        let mut bm = Vec::with_capacity(n + 1);
        bm.push(0.0);
        let mut acc = 0.0;
        for &zi in z {
            acc += scale * zi;
            bm.push(acc);
        }
        let mut fbm = Vec::with_capacity(n + 1);
        fbm.push(0.0);
        let l = &self.factor.l;
        for i in 0..n {
            let row = l.row(i);
            fbm.push((0..=i).map(|k| row[k] * z[k]).sum());
        }
        Ok((
            PathSample::new(grid, Tensor::new(vec![1, n + 1], bm)?, seed)?,
            PathSample::new(grid, Tensor::new(vec![1, n + 1], fbm)?, seed)?,
        ))
    }

    pub fn sample_pair(&self, seed: u64) -> Result<(PathSample, PathSample)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_pair_with(&mut rng, seed)
    }

    pub fn sample_pair_with(&self, rng: &mut ChaCha8Rng, seed: u64) -> Result<(PathSample, PathSample)> {
        let z = standard_normals(rng, self.spec.grid.segments());
        self.pair_from_normals(&z, seed)
    }
}

pub fn sample_fbm_pair(seed: u64, spec: &FbmSpec) -> Result<(PathSample, PathSample)> {
    FbmSampler::new(*spec)?.sample_pair(seed)
}

/// `∫_lo^hi K_H(t,s) ds` with `hi ≤ t`, using a u² substitution towards any
/// singular end (`s = 0` or `s = t`).
fn segment_integral(t: f64, lo: f64, hi: f64, hurst: f64) -> Result<f64> {
    let singular_lo = lo == 0.0;
    let singular_hi = t - hi <= 1e-14 * t;
    if singular_lo && singular_hi {
        let mid = 0.5 * (lo + hi);
        return Ok(segment_integral(t, lo, mid, hurst)? + segment_integral(t, mid, hi, hurst)?);
    }
    let (nodes, weights) = gauss_legendre_32();
    let len = hi - lo;
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        let u = 0.5 * (x + 1.0);
        let wu = 0.5 * w;
        let (s, jac) = if singular_hi {
            (hi - len * u * u, 2.0 * len * u)
        } else if singular_lo {
            (lo + len * u * u, 2.0 * len * u)
        } else {
            (lo + len * u, len)
        };
        acc += wu * jac * kernel_kh(t, s, hurst)?;
    }
    Ok(acc)
}

/// Linear map from Brownian increments on a grid to `Wⁿ` at chosen times.
///
/// The kernel is rescaled by `V_H^{-1/2}` so the limit has the standard
/// fBM covariance `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    /// Shape `(eval_times, segments)`.
    pub weights: Array2<f64>,
}

impl KernelWeights {
    pub fn new(grid: GridSpec, eval_times: &[f64], hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::Domain(format!("Hurst index must lie in (0, 1), got {hurst}")));
        }
        let knots = grid.times();
        let dt = grid.dt();
        let norm = kernel_variance_factor(hurst).sqrt().recip();
        let mut weights = Array2::zeros((eval_times.len(), grid.segments()));
        for (a, &t) in eval_times.iter().enumerate() {
            if !(0.0..=grid.horizon() * (1.0 + 1e-12)).contains(&t) {
                return Err(Error::Domain(format!("evaluation time {t} outside the grid")));
            }
            for i in 0..grid.segments() {
                let lo = knots[i];
                if lo >= t {
                    break;
                }
                let hi = knots[i + 1].min(t);
                let hi = if (t - hi).abs() <= 1e-14 * t { t } else { hi };
                weights[[a, i]] = norm * segment_integral(t, lo, hi, hurst)? / dt;
            }
        }
        Ok(Self { weights })
    }

    pub fn apply(&self, increments: &[f64]) -> Vec<f64> {
        self.weights.dot(&ndarray::ArrayView1::from(increments)).to_vec()
    }
}

/// `Wⁿ` on the Brownian path's own grid.
pub fn fbm_kernel_approx(bm: &PathSample, hurst: f64) -> Result<PathSample> {
    let grid = bm.grid;
    let kw = KernelWeights::new(grid, &grid.times(), hurst)?;
    let r = grid.points();
    let mut out = Vec::with_capacity(bm.channels() * r);
    for c in 0..bm.channels() {
        let increments: Vec<f64> = bm.channel(c).windows(2).map(|w| w[1] - w[0]).collect();
        let mut w = kw.apply(&increments);
        w[0] = 0.0;
        out.extend(w);
    }
    PathSample::new(grid, Tensor::new(vec![bm.channels(), r], out)?, bm.seed)
}
