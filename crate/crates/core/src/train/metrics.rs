use serde::{Deserialize, Serialize};

use crate::diffengine::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rel_l2: f64,
    pub rel_linf: f64,
}

/// Per-sample `(‖p − t‖₂/‖t‖₂, ‖p − t‖∞/‖t‖∞)` over `[N, …]` tensors.
pub fn per_sample_errors(pred: &Tensor, truth: &Tensor) -> Result<Vec<(f64, f64)>> {
    if pred.shape() != truth.shape() || truth.shape().is_empty() {
        return Err(Error::Dimension(format!(
            "prediction {:?} and truth {:?} differ",
            pred.shape(),
            truth.shape()
        )));
    }
    let n = truth.shape()[0];
    if n == 0 {
        return Err(Error::Metric("no samples to evaluate".into()));
    }
    let per = truth.len() / n;
    pred.data()
        .chunks(per)
        .zip(truth.data().chunks(per))
        .enumerate()
        .map(|(i, (p, t))| {
            let (mut d2, mut t2, mut dinf, mut tinf) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for (a, b) in p.iter().zip(t) {
                let d = a - b;
                d2 += d * d;
                t2 += b * b;
                dinf = dinf.max(d.abs());
                tinf = tinf.max(b.abs());
            }
            if t2 == 0.0 {
                return Err(Error::Metric(format!("target of sample {i} is identically zero")));
            }
            Ok(((d2 / t2).sqrt(), dinf / tinf))
        })
        .collect()
}

/// Means of the per-sample relative errors.
pub fn mean_errors(pred: &Tensor, truth: &Tensor) -> Result<Metrics> {
    let per = per_sample_errors(pred, truth)?;
    let n = per.len() as f64;
    Ok(Metrics {
        rel_l2: per.iter().map(|e| e.0).sum::<f64>() / n,
        rel_linf: per.iter().map(|e| e.1).sum::<f64>() / n,
    })
}
