//! Real-signal DFT along the last axis, backed by `rustfft`.
//!
//! Conventions: the forward transform is unnormalized,
//! `X_k = Σ_j x_j e^{-2πi jk/n}` for `k = 0..=n/2`; the inverse carries
//! the `1/n` factor and ignores the imaginary parts of the DC and (for
//! even `n`) Nyquist modes, exactly like a Hermitian completion would.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Forward half-spectrum DFT of `rows` contiguous real signals of length `n`.
pub fn rfft_rows(x: &[f64], n: usize) -> Vec<Complex64> {
    assert!(n > 0 && x.len() % n == 0);
    let rows = x.len() / n;
    let m = n / 2 + 1;
    let fft = plan(n, FftDirection::Forward);
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    let mut buf = vec![ZERO; n];
    let mut out = Vec::with_capacity(rows * m);
    for row in x.chunks_exact(n) {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend_from_slice(&buf[..m]);
    }
    out
}

/// Inverse of [`rfft_rows`] with `1/n` normalization.
pub fn irfft_rows(spec: &[Complex64], n: usize) -> Vec<f64> {
    let m = n / 2 + 1;
    assert!(spec.len() % m == 0);
    let rows = spec.len() / m;
    let fft = plan(n, FftDirection::Inverse);
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    let mut buf = vec![ZERO; n];
    let mut out = Vec::with_capacity(rows * n);
    let scale = 1.0 / n as f64;
    for row in spec.chunks_exact(m) {
        hermitian_fill(row, &mut buf);
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf.iter().map(|c| c.re * scale));
    }
    out
}

/// Vector-Jacobian product of [`rfft_rows`]: maps a spectrum adjoint to
/// the adjoint of the real input, `x̄_j = Re Σ_k Ḡ_k e^{+2πi jk/n}`.
pub fn rfft_rows_adjoint(grad: &[Complex64], n: usize) -> Vec<f64> {
    let m = n / 2 + 1;
    assert!(grad.len() % m == 0);
    let rows = grad.len() / m;
    let fft = plan(n, FftDirection::Inverse);
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    let mut buf = vec![ZERO; n];
    let mut out = Vec::with_capacity(rows * n);
    for row in grad.chunks_exact(m) {
        buf[..m].copy_from_slice(row);
        buf[m..].fill(ZERO);
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf.iter().map(|c| c.re));
    }
    out
}

/// Vector-Jacobian product of [`irfft_rows`]: `X̄_k = (c_k / n)·rfft(ḡ)_k`
/// with `c_k = 1` for the DC and Nyquist modes and `2` otherwise.
pub fn irfft_rows_adjoint(grad: &[f64], n: usize) -> Vec<Complex64> {
    let m = n / 2 + 1;
    let mut out = rfft_rows(grad, n);
    let inv = 1.0 / n as f64;
    for row in out.chunks_exact_mut(m) {
        for (k, v) in row.iter_mut().enumerate() {
            let edge = k == 0 || (n % 2 == 0 && k == n / 2);
            *v *= if edge { inv } else { 2.0 * inv };
        }
    }
    out
}

fn hermitian_fill(half: &[Complex64], full: &mut [Complex64]) {
    let n = full.len();
    full.fill(ZERO);
    full[0] = Complex64::new(half[0].re, 0.0);
    for k in 1..half.len() {
        if 2 * k == n {
            full[k] = Complex64::new(half[k].re, 0.0);
        } else {
            full[k] = half[k];
            full[n - k] = half[k].conj();
        }
    }
}
