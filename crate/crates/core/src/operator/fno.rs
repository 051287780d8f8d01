use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{push_affine, uniform_complex, ParamSet};
use crate::diffengine::{ops, PadMode, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Boundary treatment before the spectral layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Mirror,
    Zero,
    None,
}

impl Padding {
    fn mode(self) -> Option<PadMode> {
        match self {
            Padding::Mirror => Some(PadMode::Mirror),
            Padding::Zero => Some(PadMode::Zero),
            Padding::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnoConfig {
    pub layers: usize,
    pub channels: usize,
    pub mode_cutoff: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: Padding,
    pub projection_hidden: usize,
    /// Feeds normalized time `t/T` to the lift as one more input channel.
    pub time_channel: bool,
}

impl FnoConfig {
    /// Five layers, 32 channels, 64 retained modes, hidden projection 128.
    pub fn standard(in_channels: usize, padding: Padding) -> Self {
        Self {
            layers: 5,
            channels: 32,
            mode_cutoff: 64,
            in_channels,
            out_channels: 1,
            padding,
            projection_hidden: 128,
            time_channel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("layers", self.layers),
            ("channels", self.channels),
            ("mode_cutoff", self.mode_cutoff),
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("projection_hidden", self.projection_hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Dimension(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Length of the signal the spectral layers see for `points` samples.
    pub fn working_length(&self, points: usize) -> usize {
        match self.padding {
            Padding::None => points,
            _ => 2 * points - 2,
        }
    }

    /// Smallest number of grid points the cutoff admits.
    pub fn min_points(&self) -> usize {
        (2..).find(|&r| self.working_length(r) / 2 + 1 >= self.mode_cutoff).expect("unbounded")
    }

    /// Channels entering the lift.
    pub fn lifted_channels(&self) -> usize {
        self.in_channels + usize::from(self.time_channel)
    }

    pub fn count_params(&self) -> usize {
        let (dv, k) = (self.channels, self.mode_cutoff);
        let lift = dv * self.lifted_channels() + dv;
        let layers = self.layers * (2 * k * dv * dv + dv * dv + dv);
        let projection = self.projection_hidden * dv
            + self.projection_hidden
            + self.out_channels * self.projection_hidden
            + self.out_channels;
        lift + layers + projection
    }
}

/// Mirror-, zero- or un-padded Fourier neural operator.
///
/// Parameter order: lift, then per layer `(spectral, weight, bias)`, then
/// the two projection stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Fno {
    pub config: FnoConfig,
    pub params: ParamSet,
}

impl Fno {
    pub fn init(config: FnoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let (dv, k) = (config.channels, config.mode_cutoff);
        push_affine(&mut params, &mut rng, "lift", config.lifted_channels(), dv);
        let spectral_bound = ((dv * k) as f64).sqrt().recip();
        for l in 0..config.layers {
            params.push(format!("layer{l}.spectral"), uniform_complex(&mut rng, &[k, dv, dv], spectral_bound));
            push_affine(&mut params, &mut rng, &format!("layer{l}"), dv, dv);
        }
        push_affine(&mut params, &mut rng, "project.hidden", dv, config.projection_hidden);
        push_affine(&mut params, &mut rng, "project.out", config.projection_hidden, config.out_channels);
        Ok(Self { config, params })
    }

    /// Grid length of `shape`, checked against the configuration.
    fn grid_points(&self, shape: &[usize]) -> Result<usize> {
        let c = &self.config;
        let r = match shape[..] {
            [_, d, r] if d == c.in_channels => r,
            _ => {
                return Err(Error::Dimension(format!(
                    "expected input (batch, {}, grid), got {shape:?}",
                    c.in_channels
                )))
            }
        };
        if r < 2 {
            return Err(Error::Grid(format!("an operator input needs at least 2 grid points, got {r}")));
        }
        let available = c.working_length(r) / 2 + 1;
        if available < c.mode_cutoff {
            return Err(Error::ModeCutoff { cutoff: c.mode_cutoff, available });
        }
        Ok(r)
    }

    fn time_grid(r: usize) -> Tensor {
        let times = (0..r).map(|j| j as f64 / (r - 1) as f64).collect();
        Tensor::new(vec![1, r], times).expect("one row of r points")
    }

    /// Records the forward pass of `input` `[b, d_a, r]`, giving `[b, d_u, r]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var> {
        let c = &self.config;
        let r = self.grid_points(tape.tensor(input).shape())?;
        let mut v = input;
        if c.time_channel {
            v = tape.append_channels(v, &Self::time_grid(r))?;
        }
        if let Some(mode) = c.padding.mode() {
            v = tape.pad(v, mode)?;
        }
        v = tape.affine(v, vars[0], Some(vars[1]))?;
        for l in 0..c.layers {
            let base = 2 + 3 * l;
            v = fourier_layer(tape, v, [vars[base], vars[base + 1], vars[base + 2]], c.mode_cutoff)?;
        }
        let base = 2 + 3 * c.layers;
        v = tape.affine(v, vars[base], Some(vars[base + 1]))?;
        v = tape.activation(v)?;
        v = tape.affine(v, vars[base + 2], Some(vars[base + 3]))?;
        if c.padding.mode().is_some() {
            v = tape.truncate(v, r)?;
        }
        Ok(v)
    }

    /// The forward pass without recording, keeping only the live activations.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let c = &self.config;
        let r = self.grid_points(input.shape())?;
        let real = |i: usize| self.params.value(i).as_real().expect("real parameter");
        let mut v = if c.time_channel { ops::append_channels(input, &Self::time_grid(r))? } else { input.clone() };
        if let Some(mode) = c.padding.mode() {
            v = ops::pad(&v, mode)?;
        }
        v = ops::affine(&v, real(0), Some(real(1)))?;
        for l in 0..c.layers {
            let base = 2 + 3 * l;
            let spectral = self.params.value(base).as_complex().expect("complex parameter");
            let global = ops::irfft(&ops::mode_multiply(&ops::rfft(&v)?, spectral, c.mode_cutoff)?)?;
            let mut sum = ops::affine(&v, real(base + 1), Some(real(base + 2)))?;
            sum.data_mut().iter_mut().zip(global.data()).for_each(|(a, b)| *a = ops::gelu(*a + b));
            v = sum;
        }
        let base = 2 + 3 * c.layers;
        let mut hidden = ops::affine(&v, real(base), Some(real(base + 1)))?;
        hidden.data_mut().iter_mut().for_each(|a| *a = ops::gelu(*a));
        v = ops::affine(&hidden, real(base + 2), Some(real(base + 3)))?;
        if c.padding.mode().is_some() {
            v = ops::truncate(&v, r)?;
        }
        Ok(v)
    }
}

/// `σ(W v + b + F⁻¹(P·F v))` with `[spectral, weight, bias]` parameters.
pub fn fourier_layer(tape: &mut Tape, v: Var, layer: [Var; 3], cutoff: usize) -> Result<Var> {
    let [spectral, weight, bias] = layer;
    let local = tape.affine(v, weight, Some(bias))?;
    let spectrum = tape.rfft(v)?;
    let mixed = tape.mode_multiply(spectrum, spectral, cutoff)?;
    let global = tape.irfft(mixed)?;
    let sum = tape.add(local, global)?;
    tape.activation(sum)
}
