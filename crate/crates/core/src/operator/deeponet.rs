use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{push_affine, uniform_real, ParamSet};
use crate::diffengine::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeepOnetConfig {
    pub branch_layers: Vec<usize>,
    pub trunk_layers: Vec<usize>,
    pub latent_width: usize,
    /// Grid points the branch net is built for.
    pub points: usize,
    pub in_channels: usize,
}

impl DeepOnetConfig {
    /// Branch 4×128, trunk 3×128, latent width 300.
    pub fn standard(points: usize, in_channels: usize) -> Self {
        Self {
            branch_layers: vec![128; 4],
            trunk_layers: vec![128; 3],
            latent_width: 300,
            points,
            in_channels,
        }
    }

    fn branch_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.points * self.in_channels];
        s.extend(&self.branch_layers);
        s.push(self.latent_width);
        s
    }

    fn trunk_sizes(&self) -> Vec<usize> {
        let mut s = vec![1];
        s.extend(&self.trunk_layers);
        s.push(self.latent_width);
        s
    }

    /// Affine weights and biases of both nets plus the scalar output bias.
    pub fn count_params(&self) -> usize {
        let affine = |s: &[usize]| s.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
        affine(&self.branch_sizes()) + affine(&self.trunk_sizes()) + 1
    }
}

/// Branch/trunk operator network on a fixed grid. GELU follows every
/// hidden layer of both nets and the last trunk layer; the last branch
/// layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnet {
    pub config: DeepOnetConfig,
    pub params: ParamSet,
}

impl DeepOnet {
    pub fn init(config: DeepOnetConfig, seed: u64) -> Result<Self> {
        if config.points < 2 || config.in_channels == 0 || config.latent_width == 0 {
            return Err(Error::Dimension("DeepONet needs ≥ 2 points, ≥ 1 channel and a latent width".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (i, w) in config.branch_sizes().windows(2).enumerate() {
            push_affine(&mut params, &mut rng, &format!("branch{i}"), w[0], w[1]);
        }
        for (i, w) in config.trunk_sizes().windows(2).enumerate() {
            push_affine(&mut params, &mut rng, &format!("trunk{i}"), w[0], w[1]);
        }
        params.push("output.bias", uniform_real(&mut rng, &[1], 0.0));
        Ok(Self { config, params })
    }

    /// `input` is `[b, d_a·r]`, `times` is `[m]`; returns `[b, m]`.
    pub fn forward_flat(&self, tape: &mut Tape, vars: &[Var], input: Var, times: &Tensor) -> Result<Var> {
        let c = &self.config;
        let expected = c.points * c.in_channels;
        match tape.tensor(input).shape() {
            &[_, n] if n == expected => {}
            s => {
                return Err(Error::Resolution {
                    expected: c.points,
                    got: s.last().copied().unwrap_or(0) / c.in_channels.max(1),
                })
            }
        }
        let nb = c.branch_layers.len() + 1;
        let nt = c.trunk_layers.len() + 1;
        let mut b = input;
        for i in 0..nb {
            b = tape.affine(b, vars[2 * i], Some(vars[2 * i + 1]))?;
            if i + 1 < nb {
                b = tape.activation(b)?;
            }
        }
        let mut t = tape.constant(times.clone().reshape(&[times.len(), 1])?);
        for i in 0..nt {
            let base = 2 * (nb + i);
            t = tape.affine(t, vars[base], Some(vars[base + 1]))?;
            t = tape.activation(t)?;
        }
        tape.latent_dot(b, t, vars[2 * (nb + nt)])
    }

    /// Grid-shaped wrapper: `[b, d_a, r]` in, `[b, 1, r]` out, queried at
    /// the normalized knot times `j/(r−1)`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var> {
        let shape = tape.tensor(input).shape().to_vec();
        let (b, r) = match shape[..] {
            [b, d, r] if d == self.config.in_channels => (b, r),
            _ => return Err(Error::Dimension(format!("expected (batch, channels, grid), got {shape:?}"))),
        };
        if r != self.config.points {
            return Err(Error::Resolution { expected: self.config.points, got: r });
        }
        let times = Tensor::from_vec((0..r).map(|j| j as f64 / (r - 1) as f64).collect());
        let flat = tape.reshape(input, &[b, self.config.in_channels * r])?;
        let out = self.forward_flat(tape, vars, flat, &times)?;
        tape.reshape(out, &[b, 1, r])
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let x = tape.constant(input.clone());
        let y = self.forward(&mut tape, &vars, x)?;
        Ok(tape.tensor(y).clone())
    }
}
