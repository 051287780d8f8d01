use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffengine::{Complex64, ComplexTensor, ParamId, Tape, Tensor, Value, Var};
use crate::error::{Error, Result};

/// Ordered, named trainable arrays. The position of an entry is its
/// [`ParamId`] on the tape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, Value)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Value) -> ParamId {
        self.entries.push((name.into(), value));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn value(&self, id: ParamId) -> &Value {
        &self.entries[id].1
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Value {
        &mut self.entries[id].1
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Real scalars held, a complex entry counting as two.
    pub fn scalar_count(&self) -> usize {
        self.entries
            .iter()
            .map(|(_, v)| match v {
                Value::Real(t) => t.len(),
                Value::Complex(c) => 2 * c.len(),
                Value::Spectrum(s) => 2 * s.data().len(),
            })
            .sum()
    }

    /// Records every entry on `tape` as a parameter node.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.entries.iter().enumerate().map(|(id, (_, v))| tape.param(id, v.clone())).collect()
    }

    /// Replaces the values with `other`'s, checking names and shapes.
    pub fn assign(&mut self, other: ParamSet) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameter arrays, got {}",
                self.len(),
                other.len()
            )));
        }
        for ((name, value), (other_name, other_value)) in self.entries.iter().zip(&other.entries) {
            if name != other_name || shape_of(value) != shape_of(other_value) {
                return Err(Error::Dimension(format!(
                    "parameter {other_name} {:?} does not fit {name} {:?}",
                    shape_of(other_value),
                    shape_of(value)
                )));
            }
        }
        self.entries = other.entries;
        Ok(())
    }
}

pub(crate) fn shape_of(v: &Value) -> Vec<usize> {
    match v {
        Value::Real(t) => t.shape().to_vec(),
        Value::Complex(c) => c.shape().to_vec(),
        Value::Spectrum(s) => s.shape().to_vec(),
    }
}

pub(crate) fn uniform_real(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Value {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Value::Real(Tensor::new(shape.to_vec(), data).expect("shape"))
}

pub(crate) fn uniform_complex(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Value {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| Complex64::new(rng.random_range(-bound..=bound), rng.random_range(-bound..=bound)))
        .collect();
    Value::Complex(ComplexTensor::new(shape.to_vec(), data).expect("shape"))
}

/// Weight `[fan_out, fan_in]` and bias `[fan_out]`, both uniform on
/// `±1/√fan_in`.
pub(crate) fn push_affine(set: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize) {
    let bound = (fan_in as f64).sqrt().recip();
    set.push(format!("{name}.weight"), uniform_real(rng, &[fan_out, fan_in], bound));
    set.push(format!("{name}.bias"), uniform_real(rng, &[fan_out], bound));
}
