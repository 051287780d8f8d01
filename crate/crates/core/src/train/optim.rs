use crate::diffengine::{Gradients, Value};
use crate::operator::ParamSet;

/// `lr₀·γ^{⌊epoch/step⌋}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecay {
    pub initial: f64,
    pub step: usize,
    pub gamma: f64,
}

impl StepDecay {
    /// The factor is applied once per elapsed step, as a running product.
    pub fn rate(&self, epoch: usize) -> f64 {
        (0..epoch / self.step).fold(self.initial, |lr, _| lr * self.gamma)
    }
}

/// Adam with decoupled weight decay: `θ ← θ − lr·(m̂/(√v̂ + ε) + λθ)`.
/// Complex parameters are treated as pairs of reals.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    steps: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

fn scalar_len(v: &Value) -> usize {
    match v {
        Value::Real(t) => t.len(),
        Value::Complex(c) => 2 * c.len(),
        Value::Spectrum(s) => 2 * s.data().len(),
    }
}

fn flatten(v: &Value) -> Vec<f64> {
    match v {
        Value::Real(t) => t.data().to_vec(),
        Value::Complex(c) => c.data().iter().flat_map(|z| [z.re, z.im]).collect(),
        Value::Spectrum(s) => s.data().iter().flat_map(|z| [z.re, z.im]).collect(),
    }
}

fn update(v: &mut Value, mut f: impl FnMut(usize, &mut f64)) {
    match v {
        Value::Real(t) => t.data_mut().iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
        Value::Complex(c) => c.data_mut().iter_mut().enumerate().for_each(|(i, z)| {
            f(2 * i, &mut z.re);
            f(2 * i + 1, &mut z.im);
        }),
        Value::Spectrum(s) => s.data_mut().iter_mut().enumerate().for_each(|(i, z)| {
            f(2 * i, &mut z.re);
            f(2 * i + 1, &mut z.im);
        }),
    }
}

impl AdamW {
    pub fn new(params: &ParamSet, weight_decay: f64) -> Self {
        let sizes: Vec<usize> = params.iter().map(|(_, v)| scalar_len(v)).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            steps: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients, lr: f64) {
        self.steps += 1;
        let bias1 = 1.0 - self.beta1.powi(self.steps);
        let bias2 = 1.0 - self.beta2.powi(self.steps);
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        for id in 0..params.len() {
            let g = grads.get(id).map(flatten);
            let (m, v) = (&mut self.first[id], &mut self.second[id]);
            update(params.value_mut(id), |i, theta| {
                let gi = g.as_ref().map_or(0.0, |g| g[i]);
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *theta);
            });
        }
    }
}
