use std::fs;

use noper_core::diffengine::{Tape, Tensor, Value};
use noper_core::operator::{Fno, FnoConfig, Model, ModelKind, Padding, ParamSet};
use noper_core::sde::{downsample, euler_solve_functional};
use noper_core::train::{
    build_dataset, epoch_order, load_checkpoint, load_dataset, save_checkpoint, save_dataset, sde_draw, train_model,
    AdamW, Architecture, Checkpoint, CheckpointMeta, Metrics, Normalizer, Task, TrainConfig, TrainedModel,
    FINE_SEGMENTS,
};
use noper_core::Error;

fn small_fno(in_channels: usize, seed: u64) -> Model {
    let config = FnoConfig {
        layers: 2,
        channels: 8,
        mode_cutoff: 8,
        in_channels,
        out_channels: 1,
        padding: Padding::Mirror,
        projection_hidden: 16,
        time_channel: true,
    };
    Model::Fno(Fno::init(config, seed).unwrap())
}

#[test]
fn dataset_has_requested_size() {
    let d = build_dataset(Task::Sde1, 1024, 128, 3).unwrap();
    assert_eq!(d.len(), 1024);
    assert_eq!(d.inputs.shape(), &[1024, 2, 129]);
    assert_eq!(d.targets.shape(), &[1024, 1, 129]);
    let f = build_dataset(Task::Fbm25, 16, 32, 3).unwrap();
    assert_eq!(f.inputs.shape(), &[16, 1, 33]);
}

#[test]
fn datasets_are_deterministic() {
    for task in Task::ALL {
        let a = build_dataset(task, 8, 64, 11).unwrap();
        let b = build_dataset(task, 8, 64, 11).unwrap();
        assert_eq!(a, b, "{task}");
        let c = build_dataset(task, 8, 64, 12).unwrap();
        assert_ne!(a.targets, c.targets, "{task}");
    }
}

#[test]
fn sde_resolution_must_divide_fine_grid() {
    assert!(matches!(build_dataset(Task::Sde1, 2, 100, 0), Err(Error::Grid(_))));
}

#[test]
fn stored_targets_regenerate_from_their_noise() {
    let res = 128;
    let data = build_dataset(Task::Sde1, 4, res, 5).unwrap();
    let spec = Task::Sde1.sde().unwrap();
    let (drift, diffusion) = spec.functionals();
    for i in 0..data.len() {
        let (input, target) = data.sample(i).unwrap();
        let (xi, fine) = sde_draw(Task::Sde1, 5, i as u64, FINE_SEGMENTS).unwrap();
        assert!(input.channel(0).iter().all(|&v| v == xi));
        let coarse = downsample(&fine, FINE_SEGMENTS / res).unwrap();
        assert_eq!(coarse.channel(0), input.channel(1));
        let solved = euler_solve_functional(drift.as_ref(), diffusion.as_ref(), xi, &fine).unwrap();
        let solved = downsample(&solved.solution, FINE_SEGMENTS / res).unwrap();
        let err = solved.channel(0).iter().zip(target.channel(0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "sample {i}: {err}");
    }
}

#[test]
fn single_sample_is_memorized() {
    let data = build_dataset(Task::Sde1, 1, 32, 0).unwrap();
    // Every mode of the padded grid is kept so the path is representable.
    let fno = FnoConfig {
        layers: 2,
        channels: 32,
        mode_cutoff: 32,
        in_channels: 2,
        out_channels: 1,
        padding: Padding::Mirror,
        projection_hidden: 64,
        time_channel: true,
    };
    let config = TrainConfig { epochs: 200, dataset_size: 1, ..Default::default() };
    let (_, history) = train_model(Model::Fno(Fno::init(fno, 0).unwrap()), &data, &config).unwrap();
    let last = *history.last().unwrap();
    assert!(last < 1e-6, "final loss {last}");
}

#[test]
fn loss_decreases_on_sde1() {
    let data = build_dataset(Task::Sde1, 64, 128, 0).unwrap();
    let config = TrainConfig { epochs: 5, dataset_size: 64, ..Default::default() };
    let model = Model::standard(ModelKind::Mfno, 2, 129, 0).unwrap();
    let (_, history) = train_model(model, &data, &config).unwrap();
    assert!(history[4] < history[0], "{history:?}");
}

#[test]
fn loss_history_is_reproducible() {
    let data = build_dataset(Task::Sde2, 16, 32, 1).unwrap();
    let config = TrainConfig { epochs: 4, batch_size: 4, dataset_size: 16, ..Default::default() };
    let (a, ha) = train_model(small_fno(2, 3), &data, &config).unwrap();
    let (b, hb) = train_model(small_fno(2, 3), &data, &config).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
}

#[test]
fn adamw_step_decouples_weight_decay() {
    let mut params = ParamSet::new();
    params.push("w", Value::Real(Tensor::from_vec(vec![2.0])));
    let grads = {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let c = tape.constant(Tensor::from_vec(vec![0.5]));
        let p = tape.mul(vars[0], c).unwrap();
        let root = tape.sum(p).unwrap();
        tape.backward(root, None).unwrap()
    };
    let (lr, decay) = (0.1, 0.01);
    let mut opt = AdamW::new(&params, decay);
    opt.step(&mut params, &grads, lr);
    // First step: m̂ = g, v̂ = g², so the update is g/(|g| + ε) + λθ.
    let g: f64 = 0.5;
    let expect = 2.0 - lr * (g / (g.abs() + 1e-8) + decay * 2.0);
    let got = params.get("w").unwrap().as_real().unwrap().data()[0];
    assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
    // Coupled decay would fold λθ into the moments and give 1.9.
    assert!((got - 1.9).abs() > 1e-3);

    // Second step with the same gradient: m̂ = g and v̂ = g² again.
    let theta = got;
    opt.step(&mut params, &grads, lr);
    let expect = theta - lr * (g / (g.abs() + 1e-8) + decay * theta);
    let got = params.get("w").unwrap().as_real().unwrap().data()[0];
    assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
}

#[test]
fn learning_rate_follows_step_decay() {
    let schedule = TrainConfig::default().schedule();
    let expected = [
        (0usize, 5e-4),
        (1, 5e-4),
        (99, 5e-4),
        (100, 5e-4 * 0.9),
        (101, 5e-4 * 0.9),
        (199, 5e-4 * 0.9),
        (200, 5e-4 * 0.9 * 0.9),
        (399, 5e-4 * 0.9 * 0.9 * 0.9),
        (499, 5e-4 * 0.9 * 0.9 * 0.9 * 0.9),
    ];
    for (e, lr) in expected {
        assert_eq!(schedule.rate(e), lr, "epoch {e}");
    }
}

#[test]
fn loss_is_mean_over_batch_and_grid() {
    let pred = Tensor::new(vec![2, 1, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap();
    let target = Tensor::new(vec![2, 1, 3], vec![0.0, 2.0, 5.0, 1.0, 0.5, 4.0]).unwrap();
    let mut tape = Tape::new();
    let p = tape.constant(pred);
    let loss = tape.mse(p, &target).unwrap();
    let hand = (1.0 + 0.0 + 4.0 + 4.0 + 0.25 + 0.0) / 6.0;
    assert_eq!(tape.tensor(loss).data()[0], hand);
}

#[test]
fn every_sample_visited_once_per_epoch() {
    for epoch in 0..5 {
        let mut order = epoch_order(37, 9, epoch);
        assert_ne!(order, (0..37).collect::<Vec<_>>());
        order.sort_unstable();
        assert_eq!(order, (0..37).collect::<Vec<_>>());
    }
    assert_ne!(epoch_order(37, 9, 0), epoch_order(37, 9, 1));
}

#[test]
fn evaluation_rejects_zero_targets() {
    let model = TrainedModel { model: small_fno(1, 0), normalizer: None };
    let mut data = build_dataset(Task::Fbm75, 2, 16, 0).unwrap();
    data.targets = Tensor::zeros(&[2, 1, 17]);
    assert!(matches!(noper_core::train::evaluate_model(&model, &data), Err(Error::Metric(_))));
}

fn sample_checkpoint() -> Checkpoint {
    let data = build_dataset(Task::Sde2, 4, 32, 2).unwrap();
    let model = small_fno(2, 17);
    let trained = TrainedModel { model, normalizer: Some(Normalizer::fit(&data)) };
    let meta = CheckpointMeta {
        task: Task::Sde2,
        model: ModelKind::Mfno,
        architecture: Architecture::of(&trained.model),
        resolution: 32,
        epoch: 3,
        seed: 2,
        train: TrainConfig::default(),
        normalizer: trained.normalizer.clone(),
        metrics: Some(Metrics { rel_l2: 0.125, rel_linf: 0.25 }),
        config_hash: Some("abc123".into()),
    };
    Checkpoint::new(meta, &trained)
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.nopr");
    let ckpt = sample_checkpoint();
    save_checkpoint(&path, &ckpt).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.meta, ckpt.meta);
    for ((na, va), (nb, vb)) in ckpt.params.iter().zip(back.params.iter()) {
        assert_eq!(na, nb);
        let bits = |v: &Value| match v {
            Value::Real(t) => t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            Value::Complex(c) => c.data().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect(),
            Value::Spectrum(s) => s.data().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect(),
        };
        assert_eq!(bits(va), bits(vb), "{na}");
    }
    let trained = back.into_trained().unwrap();
    let x = build_dataset(Task::Sde2, 2, 32, 4).unwrap().inputs;
    let original = TrainedModel { model: small_fno(2, 17), normalizer: ckpt.meta.normalizer.clone() };
    assert_eq!(trained.predict(&x).unwrap(), original.predict(&x).unwrap());
}

#[test]
fn checkpoint_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.nopr");
    save_checkpoint(&path, &sample_checkpoint()).unwrap();
    let bytes = fs::read(&path).unwrap();

    let mut wrong_magic = bytes.clone();
    wrong_magic[..4].copy_from_slice(b"XXXX");
    fs::write(&path, &wrong_magic).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));

    let mut wrong_version = bytes.clone();
    wrong_version[4..8].copy_from_slice(&7u32.to_le_bytes());
    fs::write(&path, &wrong_version).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Version(7))));

    fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Corrupt(_))));

    let mut trailing = bytes.clone();
    trailing.push(0);
    fs::write(&path, &trailing).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Corrupt(_))));

    assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn dataset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.nopd");
    for task in [Task::Sde1, Task::Fbm75] {
        let data = build_dataset(task, 3, 16, 8).unwrap();
        save_dataset(&path, &data, Some("hash")).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), data);
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    }
}
