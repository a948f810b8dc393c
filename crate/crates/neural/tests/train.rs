mod common;

use amptcr_core::evalkit::Task;
use amptcr_core::fingerprint::Fingerprint;
use amptcr_neural::io::{model_bytes, parse_model, read_model, write_model};
use amptcr_neural::model::{DEFAULT_FP_WEIGHT_BINARY, DEFAULT_FP_WEIGHT_REGRESSION};
use amptcr_neural::train::history_csv;
use amptcr_neural::{fp_blend, train, Error, Model, ModelConfig, ModelInput, Sample};
use common::toy_cloud;

fn small(task: Task) -> ModelConfig {
    ModelConfig {
        n_points: 48,
        k_nn: 4,
        width: 16,
        heads: 2,
        layers: 1,
        edge_layers: 1,
        fp_weight: Some(0.0),
        task,
        epochs: 3,
        batch_size: 4,
        ..ModelConfig::default()
    }
}

fn fingerprint(seed: usize) -> Fingerprint {
    let mut fp = Fingerprint::empty(64, 2).unwrap();
    for b in [seed % 64, (seed * 7 + 3) % 64, (seed * 13 + 5) % 64] {
        fp.set(b);
    }
    fp
}

fn dataset(n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let r = 2.0 + 0.3 * i as f64;
            Sample {
                cloud: toy_cloud(&format!("m{i}"), 48, r, i as u64),
                fingerprint: Some(fingerprint(i)),
                label: r * r,
            }
        })
        .collect()
}

fn refs(s: &[Sample]) -> Vec<&Sample> {
    s.iter().collect()
}

#[test]
fn one_sample_is_memorized() {
    let data = dataset(1);
    let cfg = ModelConfig {
        epochs: 200,
        standardize_targets: false,
        dropout: 0.0,
        jitter: false,
        ..small(Task::Regression)
    };
    let t = train(&refs(&data), &cfg).unwrap();
    assert_eq!(t.history.len(), 200);
    let last = t.history.last().unwrap().train_loss;
    assert!(last < 1e-3, "final loss {last}");
    let input = ModelInput::new(&data[0].cloud, None, &cfg).unwrap();
    assert!((t.model.predict(&input).unwrap() - data[0].label).abs() < 0.05);
}

#[test]
fn fixed_seed_gives_identical_history() {
    let data = dataset(6);
    let cfg = small(Task::Regression);
    let a = train(&refs(&data), &cfg).unwrap();
    let b = train(&refs(&data), &cfg).unwrap();
    let bits = |h: &[amptcr_neural::train::EpochRecord]| h.iter().map(|r| r.train_loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.history), bits(&b.history));
    assert_eq!(a.model, b.model);
    let c = train(&refs(&data), &ModelConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(bits(&a.history), bits(&c.history));
}

#[test]
fn zero_epochs_returns_initial_parameters() {
    let data = dataset(3);
    let cfg = ModelConfig {
        epochs: 0,
        ..small(Task::Regression)
    };
    let t = train(&refs(&data), &cfg).unwrap();
    assert!(t.history.is_empty());
    let init = Model::init(cfg, data[0].cloud.channels(), 0).unwrap();
    assert_eq!(t.model.params, init.params);
}

#[test]
fn blend_endpoints_are_exact() {
    assert_eq!(fp_blend(1.7, -0.3, 0.0).unwrap(), 1.7);
    assert_eq!(fp_blend(1.7, -0.3, 1.0).unwrap(), -0.3);
    assert!(fp_blend(1.0, 1.0, 1.5).is_err());
    assert_eq!(ModelConfig { task: Task::Binary, ..ModelConfig::default() }.fp_weight(), DEFAULT_FP_WEIGHT_BINARY);
    assert_eq!(ModelConfig::default().fp_weight(), DEFAULT_FP_WEIGHT_REGRESSION);
    assert_eq!(DEFAULT_FP_WEIGHT_BINARY, 0.25);
    assert_eq!(DEFAULT_FP_WEIGHT_REGRESSION, 0.15);
}

#[test]
fn model_output_is_the_blend_of_both_heads() {
    let data = dataset(1);
    for w in [0.0, 0.15, 1.0] {
        let cfg = ModelConfig {
            fp_weight: Some(w),
            ..small(Task::Regression)
        };
        let model = Model::init(cfg.clone(), data[0].cloud.channels(), 64).unwrap();
        let input = ModelInput::new(&data[0].cloud, data[0].fingerprint.as_ref(), &cfg).unwrap();
        let f = model.forward(&input, None).unwrap();
        let a = f.tape.value(f.cloud_out).item();
        let b = f.tape.value(f.fp_out.unwrap()).item();
        assert_eq!(f.tape.value(f.out).item(), fp_blend(a, b, w).unwrap());
    }
}

#[test]
fn missing_fingerprint_is_rejected_when_weighted() {
    let data = dataset(1);
    let cfg = ModelConfig {
        fp_weight: None,
        ..small(Task::Regression)
    };
    assert!(ModelInput::new(&data[0].cloud, None, &cfg).is_err());
}

#[test]
fn binary_training_runs_and_gives_probabilities() {
    let mut data = dataset(8);
    for (i, s) in data.iter_mut().enumerate() {
        s.label = (i % 2) as f64;
    }
    let cfg = ModelConfig {
        fp_weight: None,
        ..small(Task::Binary)
    };
    let t = train(&refs(&data), &cfg).unwrap();
    for s in &data {
        let p = t.model.predict(&ModelInput::new(&s.cloud, s.fingerprint.as_ref(), &cfg).unwrap()).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    data[0].label = 0.5;
    assert!(train(&refs(&data), &cfg).is_err());
}

#[test]
fn nan_loss_aborts_with_location() {
    let mut data = dataset(4);
    data[2].label = f64::NAN;
    let cfg = ModelConfig {
        standardize_targets: false,
        batch_size: 1,
        ..small(Task::Regression)
    };
    match train(&refs(&data), &cfg) {
        Err(Error::NanLoss { epoch: 0, .. }) => {}
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("NaN label trained"),
    }
}

#[test]
fn parameter_archive_round_trip() {
    let data = dataset(4);
    let cfg = ModelConfig {
        fp_weight: Some(0.2),
        ..small(Task::Regression)
    };
    let t = train(&refs(&data), &cfg).unwrap();
    let bytes = model_bytes(&t.model).unwrap();
    assert_eq!(bytes, model_bytes(&t.model).unwrap());
    assert_eq!(parse_model(&bytes).unwrap(), t.model);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.npz");
    write_model(&t.model, &path).unwrap();
    assert_eq!(read_model(&path).unwrap(), t.model);
}

#[test]
fn history_csv_layout() {
    let data = dataset(3);
    let t = train(&refs(&data), &small(Task::Regression)).unwrap();
    let csv = history_csv(&t.history);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss");
    assert_eq!(lines.len(), 4);
    let loss: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(loss, t.history[0].train_loss);
}
