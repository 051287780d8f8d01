use std::f64::consts::PI;

use noper_core::diffengine::gradcheck::relative_errors;
use noper_core::diffengine::{ops, Complex64, ComplexTensor, PadMode, Spectrum, Tape, Tensor, Value, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// `X_k = Σ_j x_j e^{−2πijk/n}`, angles reduced mod n before the cosine.
fn direct_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|k| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                let theta = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                acc + Complex64::new(theta.cos(), theta.sin()) * v
            })
        })
        .collect()
}

#[test]
fn forward_transform_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=256 {
        let x = random(&mut rng, &[1, 1, n]);
        let fast = ops::rfft(&x).unwrap();
        let slow = direct_dft(x.data());
        let err = fast.data().iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "n = {n}: {err}");
    }
}

#[test]
fn round_trip_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=512 {
        let x = random(&mut rng, &[2, 1, n]);
        let back = ops::irfft(&ops::rfft(&x).unwrap()).unwrap();
        let err = x.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "n = {n}: {err}");
    }
}

#[test]
fn transform_adjoint_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let packed = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum::<f64>();
    for n in 2..=256 {
        let x = random(&mut rng, &[1, 1, n]);
        let y = Spectrum::new(1, 1, n, random_complex(&mut rng, n / 2 + 1)).unwrap();
        let lhs = packed(ops::rfft(&x).unwrap().data(), y.data());
        let rhs: f64 = x.data().iter().zip(ops::rfft_backward(x.shape(), &y).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "n = {n}: {lhs} vs {rhs}");

        let g = random(&mut rng, &[1, 1, n]);
        let lhs: f64 = ops::irfft(&y).unwrap().data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        // The inverse ignores imaginary parts at DC and Nyquist, so the
        // adjoint pairs with the spectrum as the inverse actually reads it.
        let rhs = packed(y.data(), ops::irfft_backward(&y, &g).data());
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "n = {n}: {lhs} vs {rhs}");
    }
}

#[test]
fn affine_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (b, ci, co, g) = (2, 2, 3, 4);
    let x = random(&mut rng, &[b, ci, g]);
    let w = random(&mut rng, &[co, ci]);
    let bias = random(&mut rng, &[co]);
    let out = ops::affine(&x, &w, Some(&bias)).unwrap();
    for bb in 0..b {
        for o in 0..co {
            for j in 0..g {
                let mut acc = bias.data()[o];
                for i in 0..ci {
                    acc += w.data()[o * ci + i] * x.get3(bb, i, j);
                }
                assert!((out.get3(bb, o, j) - acc).abs() < 1e-14);
            }
        }
    }
    let zero = ops::affine(&Tensor::zeros(&[1, 1, 3]), &Tensor::full(&[1, 1], 2.0), Some(&Tensor::from_vec(vec![1.5]))).unwrap();
    assert_eq!(zero.data(), &[1.5, 1.5, 1.5]);
}

#[test]
fn gelu_derivative_matches_difference_quotient() {
    let h = 1e-5;
    let fd = (ops::gelu(0.5 + h) - ops::gelu(0.5 - h)) / (2.0 * h);
    assert!(((ops::gelu_derivative(0.5) - fd) / fd).abs() < 1e-7);
    assert_eq!(ops::gelu(0.0), 0.0);
    assert!((ops::gelu(10.0) - 10.0).abs() < 1e-6);
}

#[test]
fn mode_multiply_matches_hand_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (c, n) = (2, 4);
    let m = n / 2 + 1;
    let x = Spectrum::new(1, c, n, random_complex(&mut rng, c * m)).unwrap();
    let p = ComplexTensor::new(vec![m, c, c], random_complex(&mut rng, m * c * c)).unwrap();
    let out = ops::mode_multiply(&x, &p, m).unwrap();
    let (xd, pd) = (x.data(), p.data());
    for k in 0..m {
        for o in 0..c {
            let expect = pd[(k * c + o) * c] * xd[k] + pd[(k * c + o) * c + 1] * xd[m + k];
            assert!((out.data()[o * m + k] - expect).norm() < 1e-15);
        }
    }
    let cut = ops::mode_multiply(&x, &p, 2).unwrap();
    for o in 0..c {
        assert_eq!(cut.data()[o * m + 2], Complex64::new(0.0, 0.0));
    }
    let zero = ops::mode_multiply(&x, &ComplexTensor::zeros(&[m, c, c]), m).unwrap();
    assert!(zero.data().iter().all(|z| z.norm() == 0.0));
    let mut eye = ComplexTensor::zeros(&[m, c, c]);
    for k in 0..m {
        for i in 0..c {
            eye.data_mut()[(k * c + i) * c + i] = Complex64::new(1.0, 0.0);
        }
    }
    assert_eq!(ops::mode_multiply(&x, &eye, m).unwrap(), x);
}

/// Weighted sum `Σ w ⊙ out` so every output entry carries a distinct weight.
fn weighted(tape: &mut Tape, out: Var, weights: &Tensor) -> Var {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    tape.sum(prod).unwrap()
}

const TOL: f64 = 1e-6;
const STEP: f64 = 1e-5;

fn assert_close(errors: &[f64], what: &str) {
    for (i, e) in errors.iter().enumerate() {
        assert!(*e < TOL, "{what}: input {i} relative error {e}");
    }
}

#[test]
fn real_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&mut rng, &[2, 3, 5]);
    let w = random(&mut rng, &[4, 3]);
    let bias = random(&mut rng, &[4]);
    let out_w = random(&mut rng, &[2, 4, 5]);
    let errs = relative_errors(
        &[Value::Real(x.clone()), Value::Real(w), Value::Real(bias)],
        |t, v| {
            let y = t.affine(v[0], v[1], Some(v[2]))?;
            Ok(weighted(t, y, &out_w))
        },
        STEP,
    )
    .unwrap();
    assert_close(&errs, "affine");

    let xw = random(&mut rng, &[2, 3, 5]);
    let errs = relative_errors(
        &[Value::Real(x.clone())],
        |t, v| {
            let y = t.activation(v[0])?;
            Ok(weighted(t, y, &xw))
        },
        STEP,
    )
    .unwrap();
    assert_close(&errs, "activation");

    let y = random(&mut rng, &[2, 3, 5]);
    let errs = relative_errors(
        &[Value::Real(x.clone()), Value::Real(y)],
        |t, v| {
            let s = t.add(v[0], v[1])?;
            let p = t.mul(s, v[0])?;
            Ok(weighted(t, p, &xw))
        },
        STEP,
    )
    .unwrap();
    assert_close(&errs, "add/mul");

    for mode in [PadMode::Mirror, PadMode::Zero] {
        let pw = random(&mut rng, &[2, 3, 8]);
        let errs = relative_errors(
            &[Value::Real(x.clone())],
            |t, v| {
                let p = t.pad(v[0], mode)?;
                Ok(weighted(t, p, &pw))
            },
            STEP,
        )
        .unwrap();
        assert_close(&errs, "pad");
    }

    let tw = random(&mut rng, &[2, 3, 3]);
    let errs = relative_errors(
        &[Value::Real(x.clone())],
        |t, v| {
            let p = t.truncate(v[0], 3)?;
            Ok(weighted(t, p, &tw))
        },
        STEP,
    )
    .unwrap();
    assert_close(&errs, "truncate");

    let rw = random(&mut rng, &[6, 5]);
    let target = random(&mut rng, &[2, 3, 5]);
    let errs = relative_errors(
        &[Value::Real(x)],
        |t, v| {
            let r = t.reshape(v[0], &[6, 5])?;
            let a = weighted(t, r, &rw);
            let m = t.mse(v[0], &target)?;
            let s = t.add(a, m)?;
            Ok(s)
        },
        STEP,
    )
    .unwrap();
    assert_close(&errs, "reshape/mse");

    let branch = random(&mut rng, &[3, 4]);
    let trunk = random(&mut rng, &[5, 4]);
    let lw = random(&mut rng, &[3, 5]);
    let errs = relative_errors(
        &[Value::Real(branch), Value::Real(trunk), Value::Real(Tensor::from_vec(vec![0.3]))],
        |t, v| {
            let o = t.latent_dot(v[0], v[1], v[2])?;
            Ok(weighted(t, o, &lw))
        },
        STEP,
    )
    .unwrap();
    assert_close(&errs, "latent_dot");
}

#[test]
fn spectral_ops_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [7usize, 8] {
        let m = n / 2 + 1;
        let x = random(&mut rng, &[2, 2, n]);
        let p = ComplexTensor::new(vec![m, 3, 2], random_complex(&mut rng, m * 6)).unwrap();
        let ow = random(&mut rng, &[2, 3, n]);
        for cutoff in [2, m] {
            let errs = relative_errors(
                &[Value::Real(x.clone()), Value::Complex(p.clone())],
                |t, v| {
                    let s = t.rfft(v[0])?;
                    let mm = t.mode_multiply(s, v[1], cutoff)?;
                    let y = t.irfft(mm)?;
                    Ok(weighted(t, y, &ow))
                },
                STEP,
            )
            .unwrap();
            assert_close(&errs, "rfft/mode_multiply/irfft");
        }

        let spec = Spectrum::new(2, 2, n, random_complex(&mut rng, 4 * m)).unwrap();
        let iw = random(&mut rng, &[2, 2, n]);
        let errs = relative_errors(
            &[Value::Spectrum(spec)],
            |t, v| {
                let y = t.irfft(v[0])?;
                Ok(weighted(t, y, &iw))
            },
            STEP,
        )
        .unwrap();
        assert_close(&errs, "irfft");
    }
}

#[test]
fn outputs_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(&mut rng, &[3, 2, 64]);
    let a = ops::irfft(&ops::rfft(&x).unwrap()).unwrap();
    let b = ops::irfft(&ops::rfft(&x).unwrap()).unwrap();
    assert_eq!(a, b);
}
