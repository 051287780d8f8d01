//! Brownian paths, their piecewise-linear interpolants, and fractional
//! Brownian motion by Cholesky factorization and by kernel integration.

mod fbm;
mod path;
pub mod special;

pub use fbm::{
    cholesky_factorize, fbm_covariance, fbm_kernel_approx, sample_fbm_pair, CovarianceFactor,
    FbmSampler, FbmSpec, KernelWeights,
};
pub use path::{
    eval_piecewise_linear, h1_seminorm_sq, path_rng, sample_brownian, standard_normals, GridSpec,
    PathSample,
};
pub use special::{hyp2f1, kernel_kh, kernel_variance_factor};
