//! Neural operators: mirror/zero/un-padded FNOs and a DeepONet baseline.

mod deeponet;
mod fno;
mod params;

pub use deeponet::{DeepOnet, DeepOnetConfig};
pub use fno::{fourier_layer, Fno, FnoConfig, Padding};
pub use params::ParamSet;

use serde::{Deserialize, Serialize};

use crate::diffengine::{Tape, Tensor, Var};
use crate::error::Result;

/// Architecture family, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mfno,
    Zfno,
    Fno,
    Deeponet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mfno, ModelKind::Zfno, ModelKind::Fno, ModelKind::Deeponet];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mfno => "mfno",
            ModelKind::Zfno => "zfno",
            ModelKind::Fno => "fno",
            ModelKind::Deeponet => "deeponet",
        }
    }

    pub fn padding(self) -> Option<Padding> {
        match self {
            ModelKind::Mfno => Some(Padding::Mirror),
            ModelKind::Zfno => Some(Padding::Zero),
            ModelKind::Fno => Some(Padding::None),
            ModelKind::Deeponet => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::Format(format!("unknown model {s:?}")))
    }
}

/// Any trainable operator mapping `[b, d_a, r]` to `[b, 1, r]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Fno(Fno),
    DeepOnet(DeepOnet),
}

impl Model {
    /// Default architecture of `kind` for `in_channels` inputs; `points`
    /// fixes the DeepONet grid.
    pub fn standard(kind: ModelKind, in_channels: usize, points: usize, seed: u64) -> Result<Self> {
        match kind.padding() {
            Some(p) => Ok(Model::Fno(Fno::init(FnoConfig::standard(in_channels, p), seed)?)),
            None => Ok(Model::DeepOnet(DeepOnet::init(DeepOnetConfig::standard(points, in_channels), seed)?)),
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Model::Fno(m) => &m.params,
            Model::DeepOnet(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Model::Fno(m) => &mut m.params,
            Model::DeepOnet(m) => &mut m.params,
        }
    }

    pub fn count_params(&self) -> usize {
        match self {
            Model::Fno(m) => m.config.count_params(),
            Model::DeepOnet(m) => m.config.count_params(),
        }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var> {
        match self {
            Model::Fno(m) => m.forward(tape, vars, input),
            Model::DeepOnet(m) => m.forward(tape, vars, input),
        }
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        match self {
            Model::Fno(m) => m.predict(input),
            Model::DeepOnet(m) => m.predict(input),
        }
    }

    /// Whether the model can be evaluated on `points` grid points.
    pub fn supports(&self, points: usize) -> bool {
        match self {
            Model::Fno(m) => points >= m.config.min_points(),
            Model::DeepOnet(m) => points == m.config.points,
        }
    }
}
