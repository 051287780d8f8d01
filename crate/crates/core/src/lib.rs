//! Mirror-padded Fourier neural operators for path-dependent SDEs and
//! fractional Brownian motion.
//!
//! - [`diffengine`]: tape-based reverse-mode differentiation with spectral ops
//! - [`stochastic`]: Brownian and fractional Brownian path generation
//! - [`sde`]: Euler schemes for path-dependent SDEs
//! - [`operator`]: MFNO / ZFNO / FNO and a DeepONet baseline
//! - [`train`]: datasets, Adam training, metrics and checkpoints

pub mod diffengine;
mod error;
pub mod operator;
pub mod sde;
pub mod stochastic;
pub mod train;

pub use error::{Error, Result};
