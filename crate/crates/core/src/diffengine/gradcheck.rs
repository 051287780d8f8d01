//! Central finite-difference check of tape gradients.

use super::tape::{Tape, Value, Var};
use crate::error::{Error, Result};

/// Step for an entry of magnitude `x`: `rel·max(|x|, 1)`.
fn step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

fn scalar_entries(v: &Value) -> usize {
    match v {
        Value::Real(t) => t.len(),
        Value::Complex(c) => 2 * c.len(),
        Value::Spectrum(s) => 2 * s.data().len(),
    }
}

fn entry_mut(v: &mut Value, i: usize) -> &mut f64 {
    let z = match v {
        Value::Real(t) => return &mut t.data_mut()[i],
        Value::Complex(c) => &mut c.data_mut()[i / 2],
        Value::Spectrum(s) => &mut s.data_mut()[i / 2],
    };
    if i % 2 == 0 {
        &mut z.re
    } else {
        &mut z.im
    }
}

fn entry(v: &Value, i: usize) -> f64 {
    match v {
        Value::Real(t) => t.data()[i],
        Value::Complex(c) => {
            let z = c.data()[i / 2];
            if i % 2 == 0 { z.re } else { z.im }
        }
        Value::Spectrum(s) => {
            let z = s.data()[i / 2];
            if i % 2 == 0 { z.re } else { z.im }
        }
    }
}

fn evaluate<F>(values: &[Value], build: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = values.iter().enumerate().map(|(id, v)| tape.param(id, v.clone())).collect();
    let root = build(&mut tape, &vars)?;
    match tape.value(root).as_real() {
        Some(t) if t.len() == 1 => Ok(t.data()[0]),
        _ => Err(Error::Dimension("finite-difference check needs a scalar root".into())),
    }
}

/// Relative 2-norm error `‖g_tape − g_fd‖/max(‖g_fd‖, ‖g_tape‖)` for each
/// entry of `values`, where `build` records a scalar function of them.
/// Complex entries are checked through their real and imaginary parts.
pub fn relative_errors<F>(values: &[Value], build: F, rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = values.iter().enumerate().map(|(id, v)| tape.param(id, v.clone())).collect();
    let root = build(&mut tape, &vars)?;
    let grads = tape.backward(root, None)?;

    let mut work = values.to_vec();
    let mut out = Vec::with_capacity(values.len());
    for id in 0..values.len() {
        let analytic = grads.get(id);
        let (mut diff, mut norm_fd, mut norm_ad) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..scalar_entries(&values[id]) {
            let x = entry(&values[id], i);
            let h = step(x, rel_step);
            *entry_mut(&mut work[id], i) = x + h;
            let up = evaluate(&work, &build)?;
            *entry_mut(&mut work[id], i) = x - h;
            let down = evaluate(&work, &build)?;
            *entry_mut(&mut work[id], i) = x;
            let fd = (up - down) / (2.0 * h);
            let ad = analytic.map_or(0.0, |g| entry(g, i));
            diff += (fd - ad).powi(2);
            norm_fd += fd * fd;
            norm_ad += ad * ad;
        }
        let scale = norm_fd.max(norm_ad).sqrt();
        out.push(if scale == 0.0 { 0.0 } else { diff.sqrt() / scale });
    }
    Ok(out)
}
