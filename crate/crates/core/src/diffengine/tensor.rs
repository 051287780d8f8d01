//! Dense real and complex arrays used by the differentiation engine.
//!
//! Layout is row-major. Model activations are `(batch, channel, grid)`;
//! spectra are `(batch, channel, mode)` and remember the length of the
//! real signal they came from.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extents of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(Error::Dimension(format!("expected rank 3, got {:?}", self.shape))),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Dimension(format!("expected rank 2, got {:?}", self.shape))),
        }
    }

    pub fn get3(&self, i: usize, j: usize, k: usize) -> f64 {
        let (_, b, c) = (self.shape[0], self.shape[1], self.shape[2]);
        self.data[(i * b + j) * c + k]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// A complex array of arbitrary rank, used for spectral weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn add_assign(&mut self, other: &ComplexTensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Half spectrum of a real signal along its last axis.
///
/// The mode extent is always `origin_length / 2 + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    batch: usize,
    channels: usize,
    origin_length: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(
        batch: usize,
        channels: usize,
        origin_length: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        let modes = origin_length / 2 + 1;
        if data.len() != batch * channels * modes {
            return Err(Error::Dimension(format!(
                "spectrum ({batch}, {channels}, {modes}) needs {} values, got {}",
                batch * channels * modes,
                data.len()
            )));
        }
        Ok(Self { batch, channels, origin_length, data })
    }

    pub fn zeros(batch: usize, channels: usize, origin_length: usize) -> Self {
        let modes = origin_length / 2 + 1;
        Self {
            batch,
            channels,
            origin_length,
            data: vec![Complex64::new(0.0, 0.0); batch * channels * modes],
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn modes(&self) -> usize {
        self.origin_length / 2 + 1
    }

    pub fn origin_length(&self) -> usize {
        self.origin_length
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.batch, self.channels, self.modes()]
    }

    pub(crate) fn add_assign(&mut self, other: &Spectrum) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
