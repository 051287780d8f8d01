use std::f64::consts::PI;

use noper_core::diffengine::gradcheck::relative_errors;
use noper_core::diffengine::{ops, Complex64, ComplexTensor, PadMode, Tape, Tensor, Value};
use noper_core::operator::{fourier_layer, DeepOnet, DeepOnetConfig, Fno, FnoConfig, Padding, ParamSet};
use noper_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn small_config(padding: Padding) -> FnoConfig {
    FnoConfig {
        layers: 2,
        channels: 4,
        mode_cutoff: 4,
        in_channels: 2,
        out_channels: 1,
        padding,
        projection_hidden: 8,
        time_channel: true,
    }
}

fn values(set: &ParamSet) -> Vec<Value> {
    set.iter().map(|(_, v)| v.clone()).collect()
}

#[test]
fn pad_and_truncate_contracts() {
    let x = Tensor::new(vec![1, 1, 3], vec![0.0, 1.0, 4.0]).unwrap();
    assert_eq!(ops::pad(&x, PadMode::Mirror).unwrap().data(), &[0.0, 1.0, 4.0, 1.0]);
    assert_eq!(ops::pad(&x, PadMode::Zero).unwrap().data(), &[0.0, 1.0, 4.0, 0.0]);
    let c = Tensor::full(&[1, 1, 9], 2.5);
    let pc = ops::pad(&c, PadMode::Mirror).unwrap();
    assert_eq!(pc.shape(), &[1, 1, 16]);
    assert!(pc.data().iter().all(|&v| v == 2.5));
    assert!(matches!(ops::pad(&Tensor::zeros(&[1, 1, 1]), PadMode::Mirror), Err(Error::Grid(_))));
    assert_eq!(ops::truncate(&Tensor::zeros(&[1, 1, 6]), 4).unwrap().shape(), &[1, 1, 4]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for r in [2usize, 3, 10, 129] {
        let x = random(&mut rng, &[2, 3, r]);
        for mode in [PadMode::Mirror, PadMode::Zero] {
            assert_eq!(ops::truncate(&ops::pad(&x, mode).unwrap(), r).unwrap(), x);
        }
        let m = ops::pad(&x, PadMode::Mirror).unwrap();
        let n = 2 * r - 2;
        for row in m.data().chunks(n) {
            for j in 0..r - 1 {
                assert_eq!(row[(r - 1) + j], row[(r - 1) - j]);
            }
        }
    }
}

#[test]
fn mirror_padding_has_no_seam_jump() {
    // a(0) = 0, a(T) = 1: a ramp has unit jumps per step and a large
    // wrap-around jump on the raw periodic torus.
    let r = 9;
    let ramp: Vec<f64> = (0..r).map(|j| j as f64 / (r - 1) as f64).collect();
    let x = Tensor::new(vec![1, 1, r], ramp.clone()).unwrap();
    let max_jump = |v: &[f64]| {
        let n = v.len();
        (0..n).map(|j| (v[(j + 1) % n] - v[j]).abs()).fold(0.0, f64::max)
    };
    let raw_adjacent = ramp.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let mirror = ops::pad(&x, PadMode::Mirror).unwrap();
    assert!(max_jump(mirror.data()) <= raw_adjacent + 1e-15);
    let zero = ops::pad(&x, PadMode::Zero).unwrap();
    assert!(max_jump(zero.data()) > raw_adjacent);
}

fn layer_params(rng: &mut ChaCha8Rng, k: usize, d: usize) -> (ComplexTensor, Tensor, Tensor) {
    let p = ComplexTensor::new(
        vec![k, d, d],
        (0..k * d * d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
    )
    .unwrap();
    (p, random(rng, &[d, d]), random(rng, &[d]))
}

fn run_layer(v: &Tensor, p: ComplexTensor, w: Tensor, b: Tensor, cutoff: usize) -> Tensor {
    let mut tape = Tape::new();
    let x = tape.constant(v.clone());
    let pv = tape.param(0, Value::Complex(p));
    let wv = tape.param(1, Value::Real(w));
    let bv = tape.param(2, Value::Real(b));
    let y = fourier_layer(&mut tape, x, [pv, wv, bv], cutoff).unwrap();
    tape.tensor(y).clone()
}

#[test]
fn fourier_layer_reduces_to_activation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 3;
    let v = random(&mut rng, &[2, d, 8]);
    let mut eye = Tensor::zeros(&[d, d]);
    for i in 0..d {
        eye.data_mut()[i * d + i] = 1.0;
    }
    let out = run_layer(&v, ComplexTensor::zeros(&[3, d, d]), eye, Tensor::zeros(&[d]), 3);
    assert_eq!(out, ops::activation(&v));

    // Band-limited input below the cutoff passes the identity spectral
    // weights unchanged.
    let n = 16;
    let k = 5;
    let data: Vec<f64> = (0..2 * d * n)
        .map(|i| {
            let (row, j) = (i / n, (i % n) as f64);
            let f = 2.0 * PI * j / n as f64;
            0.3 * row as f64 + (f * 1.0).cos() - 0.5 * (f * 3.0).sin() + 0.2 * (f * 4.0).cos()
        })
        .collect();
    let v = Tensor::new(vec![2, d, n], data).unwrap();
    let mut p = ComplexTensor::zeros(&[k, d, d]);
    for kk in 0..k {
        for i in 0..d {
            p.data_mut()[(kk * d + i) * d + i] = Complex64::new(1.0, 0.0);
        }
    }
    let out = run_layer(&v, p, Tensor::zeros(&[d, d]), Tensor::zeros(&[d]), k);
    let expect = ops::activation(&v);
    let err = out.data().iter().zip(expect.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
}

#[test]
fn fourier_layer_matches_circular_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (d, n, k) = (2, 8, 4);
    let v = random(&mut rng, &[1, d, n]);
    let (p, w, b) = layer_params(&mut rng, k, d);
    let out = run_layer(&v, p.clone(), w.clone(), b.clone(), k);

    // Real kernel κ_{o,i}[j] = (1/n) Σ_k c_k Re(P_k e^{2πijk/n}), c_0 = 1,
    // c_k = 2 otherwise (no Nyquist mode is retained for n = 8, k = 4).
    let kernel = |o: usize, i: usize, j: usize| {
        (0..k)
            .map(|kk| {
                let c = if kk == 0 { 1.0 } else { 2.0 };
                let theta = 2.0 * PI * ((j * kk) % n) as f64 / n as f64;
                let z = p.data()[(kk * d + o) * d + i] * Complex64::new(theta.cos(), theta.sin());
                c * z.re
            })
            .sum::<f64>()
            / n as f64
    };
    let mut err = 0.0f64;
    for o in 0..d {
        for j in 0..n {
            let mut acc = b.data()[o];
            for i in 0..d {
                acc += w.data()[o * d + i] * v.get3(0, i, j);
                for s in 0..n {
                    acc += kernel(o, i, (j + n - s) % n) * v.get3(0, i, s);
                }
            }
            err = err.max((ops::gelu(acc) - out.get3(0, o, j)).abs());
        }
    }
    assert!(err < 1e-10, "{err}");
}

#[test]
fn zero_parameters_give_zero_output() {
    for padding in [Padding::Mirror, Padding::Zero, Padding::None] {
        let mut fno = Fno::init(small_config(padding), 1).unwrap();
        let zeroed: Vec<(String, Value)> = fno
            .params
            .iter()
            .map(|(n, v)| {
                let z = match v {
                    Value::Real(t) => Value::Real(Tensor::zeros(t.shape())),
                    Value::Complex(c) => Value::Complex(ComplexTensor::zeros(c.shape())),
                    other => other.clone(),
                };
                (n.to_string(), z)
            })
            .collect();
        let mut set = ParamSet::new();
        for (n, v) in zeroed {
            set.push(n, v);
        }
        fno.params.assign(set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = fno.predict(&random(&mut rng, &[2, 2, 16])).unwrap();
        assert_eq!(out.shape(), &[2, 1, 16]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn output_length_matches_input_for_every_padding() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for padding in [Padding::Mirror, Padding::Zero, Padding::None] {
        let fno = Fno::init(small_config(padding), 2).unwrap();
        for r in [7usize, 16, 33] {
            let out = fno.predict(&random(&mut rng, &[3, 2, r])).unwrap();
            assert_eq!(out.shape(), &[3, 1, r]);
        }
    }
}

#[test]
fn predict_matches_recorded_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for padding in [Padding::Mirror, Padding::Zero, Padding::None] {
        for time_channel in [true, false] {
            let fno = Fno::init(FnoConfig { time_channel, ..small_config(padding) }, 6).unwrap();
            let x = random(&mut rng, &[3, 2, 21]);
            let mut tape = Tape::new();
            let vars = fno.params.register(&mut tape);
            let input = tape.constant(x.clone());
            let y = fno.forward(&mut tape, &vars, input).unwrap();
            assert_eq!(&fno.predict(&x).unwrap(), tape.tensor(y));
        }
    }
}

#[test]
fn too_coarse_grid_is_a_cutoff_error() {
    let fno = Fno::init(small_config(Padding::None), 2).unwrap();
    let x = Tensor::zeros(&[1, 2, 5]);
    assert!(matches!(fno.predict(&x), Err(Error::ModeCutoff { cutoff: 4, available: 3 })));
    let fno = Fno::init(small_config(Padding::Mirror), 2).unwrap();
    assert!(fno.predict(&Tensor::zeros(&[1, 2, 4])).is_ok());
    assert!(matches!(fno.predict(&Tensor::zeros(&[1, 2, 3])), Err(Error::ModeCutoff { .. })));
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut rng, &[2, 2, 16]);
    let target = random(&mut rng, &[2, 1, 16]);
    for padding in [Padding::Mirror, Padding::Zero, Padding::None] {
        let fno = Fno::init(small_config(padding), 11).unwrap();
        let errs = relative_errors(
            &values(&fno.params),
            |tape, vars| {
                let input = tape.constant(x.clone());
                let y = fno.forward(tape, vars, input)?;
                tape.mse(y, &target)
            },
            1e-5,
        )
        .unwrap();
        for ((name, _), e) in fno.params.iter().zip(&errs) {
            assert!(*e < 1e-6, "{padding:?} {name}: {e}");
        }
    }
}

#[test]
fn deeponet_gradients_match_finite_differences() {
    let config = DeepOnetConfig {
        branch_layers: vec![5, 4],
        trunk_layers: vec![3],
        latent_width: 4,
        points: 6,
        in_channels: 2,
    };
    let net = DeepOnet::init(config, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&mut rng, &[3, 2, 6]);
    let target = random(&mut rng, &[3, 1, 6]);
    let errs = relative_errors(
        &values(&net.params),
        |tape, vars| {
            let input = tape.constant(x.clone());
            let y = net.forward(tape, vars, input)?;
            tape.mse(y, &target)
        },
        1e-5,
    )
    .unwrap();
    for ((name, _), e) in net.params.iter().zip(&errs) {
        assert!(*e < 1e-6, "{name}: {e}");
    }
}

#[test]
fn resolution_consistency_on_trigonometric_input() {
    let fno = Fno::init(FnoConfig::standard(2, Padding::Mirror), 7).unwrap();
    let signal = |t: f64| {
        let w = 2.0 * PI * t / 12.8;
        0.5 + (w).sin() + 0.4 * (3.0 * w).cos() - 0.2 * (5.0 * w).sin() + 0.1 * (8.0 * w).cos()
    };
    let input = |segments: usize| {
        let r = segments + 1;
        let mut data = vec![1.0; r];
        data.extend((0..r).map(|j| signal(12.8 * j as f64 / segments as f64)));
        Tensor::new(vec![1, 2, r], data).unwrap()
    };
    let coarse = fno.predict(&input(128)).unwrap();
    let fine = fno.predict(&input(256)).unwrap();
    let shared: Vec<f64> = fine.data().iter().step_by(2).copied().collect();
    let diff: f64 = coarse.data().iter().zip(&shared).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = shared.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!(diff / norm < 5e-2, "relative difference {}", diff / norm);
}

#[test]
fn deeponet_contracts() {
    let config = DeepOnetConfig {
        branch_layers: vec![],
        trunk_layers: vec![],
        latent_width: 1,
        points: 2,
        in_channels: 1,
    };
    let mut net = DeepOnet::init(config, 0).unwrap();
    // branch: [u0, u1] -> 2u0 − u1 + 0.5; trunk: t -> gelu(3t − 1); bias 0.25
    let mut set = ParamSet::new();
    set.push("branch0.weight", Value::Real(Tensor::new(vec![1, 2], vec![2.0, -1.0]).unwrap()));
    set.push("branch0.bias", Value::Real(Tensor::from_vec(vec![0.5])));
    set.push("trunk0.weight", Value::Real(Tensor::new(vec![1, 1], vec![3.0]).unwrap()));
    set.push("trunk0.bias", Value::Real(Tensor::from_vec(vec![-1.0])));
    set.push("output.bias", Value::Real(Tensor::from_vec(vec![0.25])));
    net.params.assign(set).unwrap();
    let u = Tensor::new(vec![1, 2], vec![1.5, 2.0]).unwrap();
    let times = Tensor::from_vec(vec![0.0, 0.5, 1.0]);
    let mut tape = Tape::new();
    let vars = net.params.register(&mut tape);
    let x = tape.constant(u);
    let y = net.forward_flat(&mut tape, &vars, x, &times).unwrap();
    let branch = 2.0 * 1.5 - 2.0 + 0.5;
    for (j, t) in [0.0, 0.5, 1.0].iter().enumerate() {
        let expect = branch * ops::gelu(3.0 * t - 1.0) + 0.25;
        assert!((tape.tensor(y).data()[j] - expect).abs() < 1e-15);
    }

    let standard = DeepOnet::init(DeepOnetConfig::standard(5, 2), 1).unwrap();
    assert!(matches!(
        standard.predict(&Tensor::zeros(&[1, 2, 7])),
        Err(Error::Resolution { expected: 5, got: 7 })
    ));
    // Zero final branch layer leaves only the output bias.
    let mut zeroed = ParamSet::new();
    for (name, v) in standard.params.iter() {
        let v = match (name, v) {
            ("branch4.weight" | "branch4.bias", Value::Real(t)) => Value::Real(Tensor::zeros(t.shape())),
            ("output.bias", _) => Value::Real(Tensor::from_vec(vec![0.7])),
            _ => v.clone(),
        };
        zeroed.push(name, v);
    }
    let mut standard = standard;
    standard.params.assign(zeroed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let out = standard.predict(&random(&mut rng, &[2, 2, 5])).unwrap();
    assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
}

#[test]
fn parameter_accounting() {
    for padding in [Padding::Mirror, Padding::Zero, Padding::None] {
        let cfg = FnoConfig::standard(2, padding);
        let fno = Fno::init(cfg, 0).unwrap();
        assert_eq!(cfg.count_params(), fno.params.scalar_count());
    }
    let count = FnoConfig::standard(2, Padding::Mirror).count_params();
    let reported = 664_961f64;
    assert!(((count as f64 - reported) / reported).abs() < 0.01, "{count}");

    let single = FnoConfig { layers: 0, ..small_config(Padding::Mirror) };
    assert!(single.validate().is_err());

    let cfg = DeepOnetConfig::standard(129, 2);
    let net = DeepOnet::init(cfg.clone(), 0).unwrap();
    assert_eq!(cfg.count_params(), net.params.scalar_count());
    assert_eq!(cfg.count_params(), 193_368 + 1);
}
