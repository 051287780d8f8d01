//! Flat Wengert tape over tensor-valued nodes.
//!
//! Every operation appends one node holding its value and the ids of its
//! parents. Parents always precede children, so a reverse sweep over the
//! node list is a valid reverse topological order. [`Tape::backward`]
//! consumes the tape.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::ops::{self, PadMode};
use super::tensor::{ComplexTensor, Spectrum, Tensor};
use crate::error::{Error, Result};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(0);

/// Identifier under which a parameter's gradient is reported.
pub type ParamId = usize;

/// Handle to a node on a particular tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }
}

/// Value held by a node: real activations, spectra, or complex weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(Tensor),
    Spectrum(Spectrum),
    Complex(ComplexTensor),
}

impl Value {
    pub fn as_real(&self) -> Option<&Tensor> {
        match self {
            Value::Real(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_spectrum(&self) -> Option<&Spectrum> {
        match self {
            Value::Spectrum(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_complex(&self) -> Option<&ComplexTensor> {
        match self {
            Value::Complex(c) => Some(c),
            _ => None,
        }
    }

    fn zeros_like(&self) -> Value {
        match self {
            Value::Real(t) => Value::Real(Tensor::zeros(t.shape())),
            Value::Spectrum(s) => Value::Spectrum(Spectrum::zeros(s.batch(), s.channels(), s.origin_length())),
            Value::Complex(c) => Value::Complex(ComplexTensor::zeros(c.shape())),
        }
    }

    fn accumulate(&mut self, other: Value) {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => a.add_assign(&b),
            (Value::Spectrum(a), Value::Spectrum(b)) => a.add_assign(&b),
            (Value::Complex(a), Value::Complex(b)) => a.add_assign(&b),
            _ => unreachable!("adjoint kind always matches value kind"),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Affine { x: usize, w: usize, bias: Option<usize> },
    Add(usize, usize),
    Mul(usize, usize),
    Activation(usize),
    Rfft(usize),
    Irfft(usize),
    ModeMultiply { x: usize, p: usize, cutoff: usize },
    Pad { x: usize, mode: PadMode },
    Truncate { x: usize, full_len: usize },
    Reshape { x: usize },
    AppendChannels { x: usize, kept: usize },
    LatentDot { branch: usize, trunk: usize, bias: usize },
    Sum(usize),
    Mse { pred: usize, target: Tensor },
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        match *self {
            Op::Constant | Op::Param(_) => vec![],
            Op::Affine { x, w, bias } => {
                let mut v = vec![x, w];
                v.extend(bias);
                v
            }
            Op::Add(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::Activation(x) | Op::Rfft(x) | Op::Irfft(x) | Op::Sum(x) => vec![x],
            Op::ModeMultiply { x, p, .. } => vec![x, p],
            Op::Pad { x, .. } | Op::Truncate { x, .. } | Op::Reshape { x } | Op::AppendChannels { x, .. } => vec![x],
            Op::LatentDot { branch, trunk, bias } => vec![branch, trunk, bias],
            Op::Mse { pred, .. } => vec![pred],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Value,
    op: Op,
}

/// Gradients of registered parameters, keyed by [`ParamId`].
#[derive(Debug, Default)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Value>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Value> {
        self.by_param.get(&id)
    }

    pub fn real(&self, id: ParamId) -> Option<&Tensor> {
        self.get(id).and_then(Value::as_real)
    }

    pub fn complex(&self, id: ParamId) -> Option<&ComplexTensor> {
        self.get(id).and_then(Value::as_complex)
    }

    pub fn into_map(self) -> BTreeMap<ParamId, Value> {
        self.by_param
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Value, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::Graph(format!("variable {} does not belong to this tape", v.index)));
        }
        Ok(v.index)
    }

    fn real(&self, v: Var) -> Result<(usize, &Tensor)> {
        let i = self.check(v)?;
        match &self.nodes[i].value {
            Value::Real(t) => Ok((i, t)),
            _ => Err(Error::Dimension(format!("node {i} is not a real tensor"))),
        }
    }

    fn spectrum(&self, v: Var) -> Result<(usize, &Spectrum)> {
        let i = self.check(v)?;
        match &self.nodes[i].value {
            Value::Spectrum(s) => Ok((i, s)),
            _ => Err(Error::Dimension(format!("node {i} is not a spectrum"))),
        }
    }

    pub fn value(&self, v: Var) -> &Value {
        &self.nodes[v.index].value
    }

    /// Real value of `v`; panics if `v` holds a spectrum or complex weights.
    pub fn tensor(&self, v: Var) -> &Tensor {
        self.nodes[v.index].value.as_real().expect("real-valued node")
    }

    /// Records a value that takes no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Value::Real(value), Op::Constant)
    }

    /// Records a parameter whose gradient is reported under `id`.
    pub fn param(&mut self, id: ParamId, value: Value) -> Var {
        self.push(value, Op::Param(id))
    }

    pub fn affine(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let (wi, wt) = self.real(w)?;
        let (bi, bt) = match bias {
            Some(b) => {
                let (i, t) = self.real(b)?;
                (Some(i), Some(t))
            }
            None => (None, None),
        };
        let out = ops::affine(xt, wt, bt)?;
        Ok(self.push(Value::Real(out), Op::Affine { x: xi, w: wi, bias: bi }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, at) = self.real(a)?;
        let (bi, bt) = self.real(b)?;
        if at.shape() != bt.shape() {
            return Err(Error::Dimension(format!("cannot add {:?} and {:?}", at.shape(), bt.shape())));
        }
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(Value::Real(out), Op::Add(ai, bi)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, at) = self.real(a)?;
        let (bi, bt) = self.real(b)?;
        if at.shape() != bt.shape() {
            return Err(Error::Dimension(format!("cannot multiply {:?} and {:?}", at.shape(), bt.shape())));
        }
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(Value::Real(out), Op::Mul(ai, bi)))
    }

    pub fn activation(&mut self, x: Var) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let out = ops::activation(xt);
        Ok(self.push(Value::Real(out), Op::Activation(xi)))
    }

    pub fn rfft(&mut self, x: Var) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let out = ops::rfft(xt)?;
        Ok(self.push(Value::Spectrum(out), Op::Rfft(xi)))
    }

    pub fn irfft(&mut self, x: Var) -> Result<Var> {
        let (xi, xs) = self.spectrum(x)?;
        let out = ops::irfft(xs)?;
        Ok(self.push(Value::Real(out), Op::Irfft(xi)))
    }

    pub fn mode_multiply(&mut self, x: Var, p: Var, cutoff: usize) -> Result<Var> {
        let (xi, xs) = self.spectrum(x)?;
        let pi = self.check(p)?;
        let pt = self.nodes[pi]
            .value
            .as_complex()
            .ok_or_else(|| Error::Dimension(format!("node {pi} is not a complex tensor")))?;
        let out = ops::mode_multiply(xs, pt, cutoff)?;
        Ok(self.push(Value::Spectrum(out), Op::ModeMultiply { x: xi, p: pi, cutoff }))
    }

    pub fn pad(&mut self, x: Var, mode: PadMode) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let out = ops::pad(xt, mode)?;
        Ok(self.push(Value::Real(out), Op::Pad { x: xi, mode }))
    }

    pub fn truncate(&mut self, x: Var, len: usize) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let full_len = *xt.shape().last().unwrap_or(&0);
        let out = ops::truncate(xt, len)?;
        Ok(self.push(Value::Real(out), Op::Truncate { x: xi, full_len }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let out = xt.clone().reshape(shape)?;
        Ok(self.push(Value::Real(out), Op::Reshape { x: xi }))
    }

    /// Appends the fixed rows `extra` `[e, r]` as channels of every batch
    /// entry of `x` `[b, c, r]`; no gradient flows into `extra`.
    pub fn append_channels(&mut self, x: Var, extra: &Tensor) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let kept = xt.dims3()?.1;
        let out = ops::append_channels(xt, extra)?;
        Ok(self.push(Value::Real(out), Op::AppendChannels { x: xi, kept }))
    }

    pub fn latent_dot(&mut self, branch: Var, trunk: Var, bias: Var) -> Result<Var> {
        let (bi, bt) = self.real(branch)?;
        let (ti, tt) = self.real(trunk)?;
        let (ci, ct) = self.real(bias)?;
        let out = ops::latent_dot(bt, tt, ct)?;
        Ok(self.push(Value::Real(out), Op::LatentDot { branch: bi, trunk: ti, bias: ci }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let (xi, xt) = self.real(x)?;
        let out = Tensor::scalar(xt.sum());
        Ok(self.push(Value::Real(out), Op::Sum(xi)))
    }

    /// Mean squared error against a fixed target, as a scalar node.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let (pi, pt) = self.real(pred)?;
        let out = Tensor::scalar(ops::mse(pt, target)?);
        Ok(self.push(Value::Real(out), Op::Mse { pred: pi, target: target.clone() }))
    }

    /// Propagates `seed` (or 1 for a scalar root) back through the tape and
    /// returns the gradient of every parameter the root depends on.
    pub fn backward(mut self, root: Var, seed: Option<Tensor>) -> Result<Gradients> {
        let root = self.check(root)?;
        let seed = match (seed, &self.nodes[root].value) {
            (Some(s), Value::Real(v)) if s.shape() == v.shape() => Value::Real(s),
            (Some(s), v) => {
                return Err(Error::Dimension(format!(
                    "seed shape {:?} does not match root {:?}",
                    s.shape(),
                    v.as_real().map(Tensor::shape)
                )))
            }
            (None, Value::Real(v)) if v.len() == 1 => Value::Real(Tensor::full(v.shape(), 1.0)),
            (None, _) => return Err(Error::Dimension("a non-scalar root needs an explicit seed".into())),
        };

        let mut adjoints: Vec<Option<Value>> = Vec::with_capacity(root + 1);
        adjoints.resize_with(root + 1, || None);
        adjoints[root] = Some(seed);
        let mut grads = Gradients::default();

        for i in (0..=root).rev() {
            let Some(adj) = adjoints[i].take() else { continue };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Constant);
            if op.parents().iter().any(|&p| p >= i) {
                return Err(Error::Graph(format!("node {i} refers to a later node; graph is not acyclic")));
            }
            for (parent, contribution) in self.vjp(&op, i, adj, &mut grads)? {
                match &mut adjoints[parent] {
                    Some(existing) => existing.accumulate(contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
        }
        Ok(grads)
    }

    fn vjp(&self, op: &Op, i: usize, adj: Value, grads: &mut Gradients) -> Result<Vec<(usize, Value)>> {
        let real = |v: &Value| v.as_real().cloned().expect("real adjoint");
        let val = |j: usize| &self.nodes[j].value;
        let tensor = |j: usize| self.nodes[j].value.as_real().expect("real value");
        Ok(match *op {
            Op::Constant => vec![],
            Op::Param(id) => {
                match grads.by_param.get_mut(&id) {
                    Some(g) => g.accumulate(adj),
                    None => {
                        let mut g = val(i).zeros_like();
                        g.accumulate(adj);
                        grads.by_param.insert(id, g);
                    }
                }
                vec![]
            }
            Op::Affine { x, w, bias } => {
                let (gx, gw, gb) = ops::affine_backward(tensor(x), tensor(w), &real(&adj));
                let mut out = vec![(x, Value::Real(gx)), (w, Value::Real(gw))];
                if let Some(b) = bias {
                    out.push((b, Value::Real(gb)));
                }
                out
            }
            Op::Add(a, b) => vec![(a, adj.clone()), (b, adj)],
            Op::Mul(a, b) => {
                let g = real(&adj);
                let scale = |by: &Tensor| {
                    let d = g.data().iter().zip(by.data()).map(|(x, y)| x * y).collect();
                    Value::Real(Tensor::new(g.shape().to_vec(), d).expect("shape"))
                };
                vec![(a, scale(tensor(b))), (b, scale(tensor(a)))]
            }
            Op::Activation(x) => vec![(x, Value::Real(ops::activation_backward(tensor(x), &real(&adj))))],
            Op::Rfft(x) => {
                let g = adj.as_spectrum().expect("spectrum adjoint");
                vec![(x, Value::Real(ops::rfft_backward(tensor(x).shape(), g)))]
            }
            Op::Irfft(x) => {
                let s = val(x).as_spectrum().expect("spectrum value");
                vec![(x, Value::Spectrum(ops::irfft_backward(s, &real(&adj))))]
            }
            Op::ModeMultiply { x, p, cutoff } => {
                let xs = val(x).as_spectrum().expect("spectrum value");
                let pt = val(p).as_complex().expect("complex value");
                let g = adj.as_spectrum().expect("spectrum adjoint");
                let (gx, gp) = ops::mode_multiply_backward(xs, pt, cutoff, g);
                vec![(x, Value::Spectrum(gx)), (p, Value::Complex(gp))]
            }
            Op::Pad { x, mode } => vec![(x, Value::Real(ops::pad_backward(&real(&adj), mode)))],
            Op::Truncate { x, full_len } => {
                vec![(x, Value::Real(ops::truncate_backward(&real(&adj), full_len)))]
            }
            Op::Reshape { x } => {
                let g = real(&adj).reshape(tensor(x).shape())?;
                vec![(x, Value::Real(g))]
            }
            Op::AppendChannels { x, kept } => {
                vec![(x, Value::Real(ops::append_channels_backward(&real(&adj), kept)))]
            }
            Op::LatentDot { branch, trunk, bias } => {
                let (gb, gt, gc) = ops::latent_dot_backward(tensor(branch), tensor(trunk), &real(&adj));
                vec![(branch, Value::Real(gb)), (trunk, Value::Real(gt)), (bias, Value::Real(gc))]
            }
            Op::Sum(x) => {
                let s = real(&adj).data()[0];
                vec![(x, Value::Real(Tensor::full(tensor(x).shape(), s)))]
            }
            Op::Mse { pred, ref target } => {
                let s = real(&adj).data()[0];
                let p = tensor(pred);
                let k = 2.0 * s / p.len() as f64;
                let d = p.data().iter().zip(target.data()).map(|(a, b)| k * (a - b)).collect();
                vec![(pred, Value::Real(Tensor::new(p.shape().to_vec(), d)?))]
            }
        })
    }
}
