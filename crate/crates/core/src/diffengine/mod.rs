//! Minimal reverse-mode differentiation over dense arrays, including the
//! real-signal DFT and per-mode complex products used by Fourier layers.

pub mod fft;
pub mod gradcheck;
pub mod ops;
mod tape;
mod tensor;

pub use ops::PadMode;
pub use rustfft::num_complex::Complex64;
pub use tape::{Gradients, ParamId, Tape, Value, Var};
pub use tensor::{ComplexTensor, Spectrum, Tensor};
