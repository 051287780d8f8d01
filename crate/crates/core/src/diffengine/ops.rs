//! Forward kernels and their vector-Jacobian products.
//!
//! These are plain functions over [`Tensor`]/[`Spectrum`] so they can be
//! checked in isolation; [`super::Tape`] records which ones ran and
//! replays the adjoints.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft;
use super::tensor::{ComplexTensor, Spectrum, Tensor};
use crate::error::{Error, Result};

/// How a signal on `r` points is extended to the doubled periodic domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    Mirror,
    Zero,
}

/// Splits a rank-2 or rank-3 activation into `(batch, channels, grid)`.
fn bcg(x: &Tensor) -> Result<(usize, usize, usize)> {
    match x.shape() {
        &[b, c] => Ok((b, c, 1)),
        &[b, c, g] => Ok((b, c, g)),
        s => Err(Error::Dimension(format!("expected (batch, channel[, grid]), got {s:?}"))),
    }
}

fn view2(data: &[f64], rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), data).expect("contiguous block")
}

fn view2_mut(data: &mut [f64], rows: usize, cols: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((rows, cols), data).expect("contiguous block")
}

/// `out[b,o,j] = Σ_i W[o,i]·x[b,i,j] + bias[o]`.
pub fn affine(x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (batch, c_in, g) = bcg(x)?;
    let (c_out, w_in) = w.dims2()?;
    if w_in != c_in {
        return Err(Error::Dimension(format!(
            "weight expects {w_in} input channels, activation has {c_in}"
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::Dimension(format!(
                "bias shape {:?} does not match {c_out} output channels",
                b.shape()
            )));
        }
    }
    let mut out = vec![0.0; batch * c_out * g];
    let wv = view2(w.data(), c_out, c_in);
    for (xb, ob) in x.data().chunks_exact(c_in * g).zip(out.chunks_exact_mut(c_out * g)) {
        if let Some(b) = bias {
            for (row, &bv) in ob.chunks_exact_mut(g).zip(b.data()) {
                row.fill(bv);
            }
        }
        let mut ov = view2_mut(ob, c_out, g);
        general_mat_mul(1.0, &wv, &view2(xb, c_in, g), 1.0, &mut ov);
    }
    let mut shape = x.shape().to_vec();
    shape[1] = c_out;
    Tensor::new(shape, out)
}

/// Adjoints of [`affine`] with respect to `(x, W, bias)`.
pub fn affine_backward(x: &Tensor, w: &Tensor, grad: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (_, c_in, g) = bcg(x).expect("validated in forward");
    let (c_out, _) = w.dims2().expect("validated in forward");
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = vec![0.0; c_out * c_in];
    let mut gb = vec![0.0; c_out];
    let wv = view2(w.data(), c_out, c_in);
    for ((xb, gob), gxb) in x
        .data()
        .chunks_exact(c_in * g)
        .zip(grad.data().chunks_exact(c_out * g))
        .zip(gx.data_mut().chunks_exact_mut(c_in * g))
    {
        let go = view2(gob, c_out, g);
        general_mat_mul(1.0, &wv.t(), &go, 0.0, &mut view2_mut(gxb, c_in, g));
        general_mat_mul(1.0, &go, &view2(xb, c_in, g).t(), 1.0, &mut view2_mut(&mut gw, c_out, c_in));
        for (acc, row) in gb.iter_mut().zip(gob.chunks_exact(g)) {
            *acc += row.iter().sum::<f64>();
        }
    }
    (
        gx,
        Tensor::new(vec![c_out, c_in], gw).expect("shape"),
        Tensor::new(vec![c_out], gb).expect("shape"),
    )
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x·Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn gelu_derivative(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn activation(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| gelu(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

pub fn activation_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    let data = x.data().iter().zip(grad.data()).map(|(&v, &g)| g * gelu_derivative(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

pub fn rfft(x: &Tensor) -> Result<Spectrum> {
    let (b, c, g) = x.dims3()?;
    if g < 2 {
        return Err(Error::Dimension(format!("forward DFT needs at least 2 grid points, got {g}")));
    }
    Spectrum::new(b, c, g, fft::rfft_rows(x.data(), g))
}

pub fn rfft_backward(x_shape: &[usize], grad: &Spectrum) -> Tensor {
    let data = fft::rfft_rows_adjoint(grad.data(), grad.origin_length());
    Tensor::new(x_shape.to_vec(), data).expect("same shape")
}

pub fn irfft(spec: &Spectrum) -> Result<Tensor> {
    let n = spec.origin_length();
    if n < 2 || spec.data().len() != spec.batch() * spec.channels() * (n / 2 + 1) {
        return Err(Error::Dimension(format!(
            "spectrum with {} entries is inconsistent with origin length {n}",
            spec.data().len()
        )));
    }
    Tensor::new(vec![spec.batch(), spec.channels(), n], fft::irfft_rows(spec.data(), n))
}

pub fn irfft_backward(spec: &Spectrum, grad: &Tensor) -> Spectrum {
    let n = spec.origin_length();
    Spectrum::new(spec.batch(), spec.channels(), n, fft::irfft_rows_adjoint(grad.data(), n))
        .expect("same shape")
}

fn check_modes(x: &Spectrum, p: &ComplexTensor, cutoff: usize) -> Result<(usize, usize)> {
    let (k_w, c_out, c_in) = match p.shape() {
        &[k, o, i] => (k, o, i),
        s => return Err(Error::Dimension(format!("spectral weights must be rank 3, got {s:?}"))),
    };
    if c_in != x.channels() {
        return Err(Error::Dimension(format!(
            "spectral weights expect {c_in} channels, spectrum has {}",
            x.channels()
        )));
    }
    if cutoff > x.modes() {
        return Err(Error::ModeCutoff { cutoff, available: x.modes() });
    }
    if cutoff > k_w {
        return Err(Error::Dimension(format!("cutoff {cutoff} exceeds the {k_w} stored weight modes")));
    }
    Ok((c_out, c_in))
}

/// `out[b,:,k] = P[k]·X[b,:,k]` for `k < cutoff`, zero above.
pub fn mode_multiply(x: &Spectrum, p: &ComplexTensor, cutoff: usize) -> Result<Spectrum> {
    let (c_out, c_in) = check_modes(x, p, cutoff)?;
    let batch = x.batch();
    let (xr, xi) = gather_modes(x.data(), batch, c_in, x.modes(), cutoff);
    let (pr, pi) = split_weights(p.data(), cutoff * c_out * c_in);
    let mut or = vec![0.0; cutoff * c_out * batch];
    let mut oi = vec![0.0; cutoff * c_out * batch];
    for k in 0..cutoff {
        let pkr = view2(&pr[k * c_out * c_in..], c_out, c_in);
        let pki = view2(&pi[k * c_out * c_in..], c_out, c_in);
        let xkr = view2(&xr[k * c_in * batch..], c_in, batch);
        let xki = view2(&xi[k * c_in * batch..], c_in, batch);
        let mut okr = view2_mut(&mut or[k * c_out * batch..], c_out, batch);
        general_mat_mul(1.0, &pkr, &xkr, 0.0, &mut okr);
        general_mat_mul(-1.0, &pki, &xki, 1.0, &mut okr);
        let mut oki = view2_mut(&mut oi[k * c_out * batch..], c_out, batch);
        general_mat_mul(1.0, &pkr, &xki, 0.0, &mut oki);
        general_mat_mul(1.0, &pki, &xkr, 1.0, &mut oki);
    }
    let mut out = Spectrum::zeros(batch, c_out, x.origin_length());
    scatter_modes(&or, &oi, out.data_mut(), batch, c_out, x.modes(), cutoff);
    Ok(out)
}

/// Adjoints of [`mode_multiply`] with respect to `(X, P)`:
/// `X̄_k = P_kᴴ Ḡ_k` and `P̄_k = Ḡ_k X_kᴴ`.
pub fn mode_multiply_backward(
    x: &Spectrum,
    p: &ComplexTensor,
    cutoff: usize,
    grad: &Spectrum,
) -> (Spectrum, ComplexTensor) {
    let (c_out, c_in) = (p.shape()[1], p.shape()[2]);
    let (batch, m) = (x.batch(), x.modes());
    let (xr, xi) = gather_modes(x.data(), batch, c_in, m, cutoff);
    let (gr, gi) = gather_modes(grad.data(), batch, c_out, m, cutoff);
    let (pr, pi) = split_weights(p.data(), cutoff * c_out * c_in);
    let mut gxr = vec![0.0; cutoff * c_in * batch];
    let mut gxi = vec![0.0; cutoff * c_in * batch];
    let mut gp = ComplexTensor::zeros(p.shape());
    let mut gpr = vec![0.0; c_out * c_in];
    let mut gpi = vec![0.0; c_out * c_in];
    for k in 0..cutoff {
        let pkr = view2(&pr[k * c_out * c_in..], c_out, c_in);
        let pki = view2(&pi[k * c_out * c_in..], c_out, c_in);
        let xkr = view2(&xr[k * c_in * batch..], c_in, batch);
        let xki = view2(&xi[k * c_in * batch..], c_in, batch);
        let gkr = view2(&gr[k * c_out * batch..], c_out, batch);
        let gki = view2(&gi[k * c_out * batch..], c_out, batch);

        let mut dr = view2_mut(&mut gxr[k * c_in * batch..], c_in, batch);
        general_mat_mul(1.0, &pkr.t(), &gkr, 0.0, &mut dr);
        general_mat_mul(1.0, &pki.t(), &gki, 1.0, &mut dr);
        let mut di = view2_mut(&mut gxi[k * c_in * batch..], c_in, batch);
        general_mat_mul(1.0, &pkr.t(), &gki, 0.0, &mut di);
        general_mat_mul(-1.0, &pki.t(), &gkr, 1.0, &mut di);

        let mut wr = view2_mut(&mut gpr, c_out, c_in);
        general_mat_mul(1.0, &gkr, &xkr.t(), 0.0, &mut wr);
        general_mat_mul(1.0, &gki, &xki.t(), 1.0, &mut wr);
        let mut wi = view2_mut(&mut gpi, c_out, c_in);
        general_mat_mul(1.0, &gki, &xkr.t(), 0.0, &mut wi);
        general_mat_mul(-1.0, &gkr, &xki.t(), 1.0, &mut wi);
        for (z, (&re, &im)) in gp.data_mut()[k * c_out * c_in..][..c_out * c_in].iter_mut().zip(gpr.iter().zip(&gpi)) {
            *z = Complex64::new(re, im);
        }
    }
    let mut gx = Spectrum::zeros(batch, c_in, x.origin_length());
    scatter_modes(&gxr, &gxi, gx.data_mut(), batch, c_in, m, cutoff);
    (gx, gp)
}

/// Copies the first `cutoff` modes of `[b, c, m]` into real and imaginary
/// planes laid out `[k, c, b]`.
fn gather_modes(data: &[Complex64], batch: usize, channels: usize, m: usize, cutoff: usize) -> (Vec<f64>, Vec<f64>) {
    let mut re = vec![0.0; cutoff * channels * batch];
    let mut im = vec![0.0; cutoff * channels * batch];
    for b in 0..batch {
        for c in 0..channels {
            let row = &data[(b * channels + c) * m..][..cutoff];
            for (k, z) in row.iter().enumerate() {
                let idx = (k * channels + c) * batch + b;
                re[idx] = z.re;
                im[idx] = z.im;
            }
        }
    }
    (re, im)
}

fn scatter_modes(re: &[f64], im: &[f64], out: &mut [Complex64], batch: usize, channels: usize, m: usize, cutoff: usize) {
    for b in 0..batch {
        for c in 0..channels {
            let row = &mut out[(b * channels + c) * m..][..cutoff];
            for (k, z) in row.iter_mut().enumerate() {
                let idx = (k * channels + c) * batch + b;
                *z = Complex64::new(re[idx], im[idx]);
            }
        }
    }
}

fn split_weights(data: &[Complex64], len: usize) -> (Vec<f64>, Vec<f64>) {
    data[..len].iter().map(|z| (z.re, z.im)).unzip()
}

/// Extends each row of length `r` to length `2r - 2`.
pub fn pad(x: &Tensor, mode: PadMode) -> Result<Tensor> {
    let (b, c, r) = x.dims3()?;
    if r < 2 {
        return Err(Error::Grid(format!("padding needs at least 2 grid points, got {r}")));
    }
    let n = 2 * r - 2;
    let mut out = Vec::with_capacity(b * c * n);
    for row in x.data().chunks_exact(r) {
        out.extend_from_slice(row);
        match mode {
            PadMode::Mirror => out.extend(row[1..r - 1].iter().rev()),
            PadMode::Zero => out.extend(std::iter::repeat_n(0.0, r - 2)),
        }
    }
    Tensor::new(vec![b, c, n], out)
}

pub fn pad_backward(grad: &Tensor, mode: PadMode) -> Tensor {
    let (b, c, n) = grad.dims3().expect("validated in forward");
    let r = n / 2 + 1;
    let mut out = Vec::with_capacity(b * c * r);
    for row in grad.data().chunks_exact(n) {
        let start = out.len();
        out.extend_from_slice(&row[..r]);
        if mode == PadMode::Mirror {
            for j in 1..r - 1 {
                out[start + j] += row[n - j];
            }
        }
    }
    Tensor::new(vec![b, c, r], out).expect("shape")
}

/// `[b, c, r]` followed by the rows of `extra` `[e, r]` gives `[b, c + e, r]`.
pub fn append_channels(x: &Tensor, extra: &Tensor) -> Result<Tensor> {
    let (b, c, r) = x.dims3()?;
    let (e, re) = extra.dims2()?;
    if re != r {
        return Err(Error::Dimension(format!("cannot append rows of length {re} to a grid of {r}")));
    }
    let mut out = Vec::with_capacity(b * (c + e) * r);
    for xb in x.data().chunks_exact(c * r) {
        out.extend_from_slice(xb);
        out.extend_from_slice(extra.data());
    }
    Tensor::new(vec![b, c + e, r], out)
}

pub fn append_channels_backward(grad: &Tensor, kept: usize) -> Tensor {
    let (b, c, r) = grad.dims3().expect("validated in forward");
    let data = grad.data().chunks_exact(c * r).flat_map(|g| &g[..kept * r]).copied().collect();
    Tensor::new(vec![b, kept, r], data).expect("shape")
}

/// Keeps the first `len` samples of each row.
pub fn truncate(x: &Tensor, len: usize) -> Result<Tensor> {
    let (b, c, n) = x.dims3()?;
    if len > n {
        return Err(Error::Dimension(format!("cannot truncate length {n} to {len}")));
    }
    let data = x.data().chunks_exact(n).flat_map(|row| &row[..len]).copied().collect();
    Tensor::new(vec![b, c, len], data)
}

pub fn truncate_backward(grad: &Tensor, full_len: usize) -> Tensor {
    let (b, c, len) = grad.dims3().expect("validated in forward");
    let mut out = vec![0.0; b * c * full_len];
    for (dst, src) in out.chunks_exact_mut(full_len).zip(grad.data().chunks_exact(len)) {
        dst[..len].copy_from_slice(src);
    }
    Tensor::new(vec![b, c, full_len], out).expect("shape")
}

/// `out[b,t] = Σ_k branch[b,k]·trunk[t,k] + bias`.
pub fn latent_dot(branch: &Tensor, trunk: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (b, p) = branch.dims2()?;
    let (m, p2) = trunk.dims2()?;
    if p != p2 || bias.len() != 1 {
        return Err(Error::Dimension(format!(
            "branch width {p} and trunk width {p2} must agree and bias must be scalar"
        )));
    }
    let mut out = vec![bias.data()[0]; b * m];
    general_mat_mul(
        1.0,
        &view2(branch.data(), b, p),
        &view2(trunk.data(), m, p).t(),
        1.0,
        &mut view2_mut(&mut out, b, m),
    );
    Tensor::new(vec![b, m], out)
}

pub fn latent_dot_backward(branch: &Tensor, trunk: &Tensor, grad: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (b, p) = branch.dims2().expect("validated");
    let (m, _) = trunk.dims2().expect("validated");
    let g = view2(grad.data(), b, m);
    let mut gb = vec![0.0; b * p];
    let mut gt = vec![0.0; m * p];
    general_mat_mul(1.0, &g, &view2(trunk.data(), m, p), 0.0, &mut view2_mut(&mut gb, b, p));
    general_mat_mul(1.0, &g.t(), &view2(branch.data(), b, p), 0.0, &mut view2_mut(&mut gt, m, p));
    (
        Tensor::new(vec![b, p], gb).expect("shape"),
        Tensor::new(vec![m, p], gt).expect("shape"),
        Tensor::scalar(grad.sum()),
    )
}

/// `(1/N)·Σ (pred − target)²` over every entry.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "prediction {:?} and target {:?} differ",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(shape: [usize; 3], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn affine_identity_and_bias() {
        let x = t3([1, 2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let eye = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(affine(&x, &eye, None).unwrap(), x);

        let zero = Tensor::zeros(&[1, 1, 4]);
        let w = Tensor::new(vec![1, 1], vec![0.7]).unwrap();
        let out = affine(&zero, &w, Some(&Tensor::from_vec(vec![1.5]))).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn affine_rejects_channel_mismatch() {
        let x = Tensor::zeros(&[1, 3, 4]);
        let w = Tensor::zeros(&[2, 2]);
        assert!(matches!(affine(&x, &w, None), Err(Error::Dimension(_))));
    }

    #[test]
    fn activation_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(10.0) - 10.0).abs() < 1e-6);
        let h = 1e-5;
        let fd = (gelu(0.5 + h) - gelu(0.5 - h)) / (2.0 * h);
        assert!(((gelu_derivative(0.5) - fd) / fd).abs() < 1e-7);
    }

    #[test]
    fn mirror_and_zero_padding() {
        let x = t3([1, 1, 3], &[0.0, 1.0, 4.0]);
        assert_eq!(pad(&x, PadMode::Mirror).unwrap().data(), &[0.0, 1.0, 4.0, 1.0]);
        assert_eq!(pad(&x, PadMode::Zero).unwrap().data(), &[0.0, 1.0, 4.0, 0.0]);
        let short = t3([1, 1, 1], &[1.0]);
        assert!(matches!(pad(&short, PadMode::Mirror), Err(Error::Grid(_))));
    }

    #[test]
    fn truncate_keeps_prefix() {
        let x = t3([1, 1, 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(truncate(&x, 4).unwrap().data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn mode_multiply_cutoff_error() {
        let x = Spectrum::zeros(1, 2, 4);
        let p = ComplexTensor::zeros(&[4, 2, 2]);
        assert!(matches!(mode_multiply(&x, &p, 4), Err(Error::ModeCutoff { cutoff: 4, available: 3 })));
    }

    #[test]
    fn irfft_rejects_inconsistent_origin() {
        let s = Spectrum::zeros(1, 1, 1);
        assert!(matches!(irfft(&s), Err(Error::Dimension(_))));
    }
}
