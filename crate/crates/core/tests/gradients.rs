mod common;

use common::worst_relative_error;
use graspsense::controller::MotionKind;
use graspsense::dataset::{FeatureSequence, StepTruth};
use graspsense::dsp::{MfccConfig, MfccMatrix};
use graspsense::models::{
    softmax, train_classifier, train_predictor, ClassifierArch, ClassifierTrainConfig, LabeledMfcc,
    MaterialClassifier, PredictorArch, PredictorTrainConfig, Scope, SgdConfig, SlipPredictor,
    Target,
};
use graspsense::Material;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn tiny_classifier(seed: u64) -> MaterialClassifier {
    let arch = ClassifierArch {
        n_coeffs: 3,
        n_frames: 14,
        channels: [2, 3],
        kernel: 3,
        n_classes: 5,
    };
    let mfcc = MfccConfig {
        n_coeffs: 3,
        ..MfccConfig::default()
    };
    MaterialClassifier::new(arch, mfcc, seed).unwrap()
}

#[test]
fn classifier_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..5u64 {
        let model = tiny_classifier(trial);
        let x: Vec<f64> = (0..model.arch().input_len())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let label = (trial % 5) as usize;
        let (_, grad) = model.loss_and_gradient(&x, label).unwrap();
        let mut probe = model.clone();
        let worst = worst_relative_error(model.params(), &grad, 0..grad.len(), 1e-6, |p| {
            probe.set_params(p.to_vec()).unwrap();
            probe.loss_and_gradient(&x, label).unwrap().0
        });
        assert!(
            worst < TOL,
            "classifier trial {trial}: worst relative error {worst:e}"
        );
    }
}

fn tiny_predictor(seed: u64) -> SlipPredictor {
    let arch = PredictorArch {
        input_dim: 5,
        hidden: 4,
        window: 3,
        horizon: 0,
    };
    let mut m = SlipPredictor::new(arch, MotionKind::Shaking, Scope::Default, seed).unwrap();
    // larger weights push the gates away from their linear regime
    let scaled = m.params().iter().map(|p| p * 3.0).collect();
    m.set_params(scaled).unwrap();
    m
}

#[test]
fn predictor_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..5u64 {
        let model = tiny_predictor(trial);
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let target = Target {
            slip: trial % 2 == 0,
            force: rng.random_range(-1.0..2.0),
            row: rng.random_range(0.0..15.0),
            col: rng.random_range(0.0..15.0),
        };
        let (_, grad) = model.loss_and_gradient(&xs, &target).unwrap();
        let mut probe = model.clone();
        let worst = worst_relative_error(model.params(), &grad, 0..grad.len(), 1e-6, |p| {
            probe.set_params(p.to_vec()).unwrap();
            probe.loss(&xs, &target).unwrap()
        });
        assert!(
            worst < TOL,
            "predictor trial {trial}: worst relative error {worst:e}"
        );
    }
}

/// Five separable classes of random 98×13 MFCC-shaped matrices.
fn synthetic_mfcc(n_per_class: usize, seed: u64) -> Vec<LabeledMfcc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = MfccConfig::default();
    let mut out = Vec::new();
    for m in Material::ALL {
        for i in 0..n_per_class {
            let frames = (0..98)
                .map(|_| {
                    (0..13)
                        .map(|c| if c == m.index() { 2.0 } else { 0.0 } + rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            out.push(LabeledMfcc {
                mfcc: MfccMatrix {
                    frames,
                    config: config.clone(),
                },
                label: m,
                source_trial: format!("{m}-{i}"),
            });
        }
    }
    out
}

fn small_classifier_cfg(seed: u64) -> ClassifierTrainConfig {
    ClassifierTrainConfig {
        sgd: SgdConfig {
            epochs: 4,
            lr: 0.01,
            momentum: 0.9,
            batch: 8,
            seed,
        },
        channels: [4, 4],
    }
}

#[test]
fn classifier_training_is_bitwise_deterministic_and_reduces_loss() {
    let train = synthetic_mfcc(8, 3);
    let held = synthetic_mfcc(3, 4);
    let a = train_classifier(&train, &held, &small_classifier_cfg(9)).unwrap();
    let b = train_classifier(&train, &held, &small_classifier_cfg(9)).unwrap();
    let bits = |m: &MaterialClassifier| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.model), bits(&b.model));
    assert!(a.loss_history.last().unwrap() < &a.loss_history[0]);
    let c = train_classifier(&train, &held, &small_classifier_cfg(10)).unwrap();
    assert_ne!(bits(&a.model), bits(&c.model));
}

#[test]
fn classifier_rejects_missing_class() {
    let train: Vec<LabeledMfcc> = synthetic_mfcc(4, 5)
        .into_iter()
        .filter(|d| d.label != Material::Empty)
        .collect();
    let held = synthetic_mfcc(1, 6);
    assert!(matches!(
        train_classifier(&train, &held, &small_classifier_cfg(1)),
        Err(graspsense::Error::MissingClass(_))
    ));
}

/// Sequences where slip follows a large first feature two steps later.
fn synthetic_sequences(n: usize, seed: u64) -> Vec<FeatureSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let len = 60;
            let drive: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let features = drive
                .iter()
                .map(|&d| {
                    let mut f = vec![0.0; graspsense::tactile::FEATURE_DIM];
                    f[0] = d;
                    f[1] = rng.random_range(-0.1..0.1);
                    f
                })
                .collect();
            let truth = (0..len)
                .map(|i| {
                    let cause = if i >= 2 { drive[i - 2] } else { 0.0 };
                    StepTruth {
                        slip: cause > 0.5,
                        max_force: 1.0 + cause,
                        max_cell: (8, 8),
                        dropped: false,
                        slip_displacement: 0.0,
                    }
                })
                .collect();
            FeatureSequence {
                trial_id: format!("s{k}"),
                material: Material::Rice,
                motion: MotionKind::Shaking,
                features,
                truth,
            }
        })
        .collect()
}

fn small_predictor_cfg(seed: u64) -> PredictorTrainConfig {
    PredictorTrainConfig {
        sgd: SgdConfig {
            epochs: 3,
            lr: 0.02,
            momentum: 0.9,
            batch: 16,
            seed,
        },
        hidden: 6,
        window: 4,
        horizon: 0,
        stride: 1,
        clip_norm: 5.0,
    }
}

#[test]
fn predictor_training_is_bitwise_deterministic_and_reduces_loss() {
    let train = synthetic_sequences(6, 1);
    let held = synthetic_sequences(2, 2);
    let run = |seed| {
        train_predictor(
            &train,
            &held,
            MotionKind::Shaking,
            Scope::Default,
            &small_predictor_cfg(seed),
            None,
        )
        .unwrap()
    };
    let a = run(4);
    let b = run(4);
    assert_eq!(
        a.model
            .params()
            .iter()
            .map(|p| p.to_bits())
            .collect::<Vec<_>>(),
        b.model
            .params()
            .iter()
            .map(|p| p.to_bits())
            .collect::<Vec<_>>()
    );
    assert!(a.loss_history.last().unwrap() < &a.loss_history[0]);
    assert!(a.metrics.slip_auc > 0.5);
}

#[test]
fn predictor_rejects_empty_scope() {
    let train = synthetic_sequences(2, 1);
    let r = train_predictor(
        &train,
        &train,
        MotionKind::Rotation,
        Scope::Default,
        &small_predictor_cfg(1),
        None,
    );
    assert!(matches!(r, Err(graspsense::Error::EmptyDataset(_))));
}

#[test]
fn saved_models_reload_bit_exactly() {
    let c = tiny_classifier(3);
    let back = MaterialClassifier::from_bytes(&c.to_bytes().unwrap()).unwrap();
    assert_eq!(back.params(), c.params());
    let p = tiny_predictor(3);
    let back = SlipPredictor::from_bytes(&p.to_bytes().unwrap()).unwrap();
    let rounded: Vec<f64> = p.params().iter().map(|v| f64::from(*v as f32)).collect();
    assert_eq!(back.params(), rounded.as_slice());
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(logits in prop::collection::vec(-30.0f64..30.0, 5), shift in -500.0f64..500.0) {
        let a = softmax(&logits);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn classifier_outputs_are_probabilities(seed in 0u64..1000, scale in 0.1f64..20.0) {
        let model = tiny_classifier(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..model.arch().input_len()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let p = model.probabilities(&x).unwrap();
        prop_assert_eq!(p.len(), 5);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(&p, &model.probabilities(&x).unwrap());
    }
}
