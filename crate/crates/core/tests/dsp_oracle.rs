mod common;

use common::NaiveMfcc;
use graspsense::dsp::{MfccConfig, MfccExtractor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn mfcc_matches_naive_oracle_on_noise_tones_and_bursts() {
    let fast = MfccExtractor::new(MfccConfig::default()).unwrap();
    let naive = NaiveMfcc::new();
    let mut signals = vec![random_signal(11, 16_000)];
    signals.push(
        (0..16_000)
            .map(|n| (2.0 * std::f64::consts::PI * 1234.5 * n as f64 / 16_000.0).sin() * 0.3)
            .collect(),
    );
    let mut burst = vec![0.0; 16_000];
    burst[4000..4400].copy_from_slice(&random_signal(12, 400));
    signals.push(burst);
    for x in &signals {
        let a = fast.compute(x).unwrap();
        let b = naive.compute(x);
        assert_eq!(a.n_frames(), 98);
        let err = max_abs_diff(&a.frames, &b);
        assert!(err < 1e-6, "max abs error {err:e}");
    }
}

#[test]
fn one_second_yields_ninety_eight_frames() {
    // 1 + floor((16000 - 400) / 160)
    assert_eq!(MfccConfig::default().frame_count(16_000), 98);
    assert_eq!(MfccConfig::default().frame_count(400), 1);
    assert_eq!(MfccConfig::default().frame_count(399), 0);
}

#[test]
fn gain_only_moves_the_zeroth_coefficient() {
    let fast = MfccExtractor::new(MfccConfig::default()).unwrap();
    let x = random_signal(5, 16_000);
    let base = fast.compute(&x).unwrap();
    for g in [0.1, 3.0] {
        let scaled: Vec<f64> = x.iter().map(|v| v * g).collect();
        let m = fast.compute(&scaled).unwrap();
        let shift = 40f64.sqrt() * 2.0 * f64::ln(g);
        for (fa, fb) in base.frames.iter().zip(&m.frames) {
            assert!((fb[0] - fa[0] - shift).abs() < 1e-6);
            for k in 1..13 {
                assert!((fb[k] - fa[k]).abs() < 1e-6, "coefficient {k}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn arbitrary_lengths_match_oracle(len in 400usize..3000, seed in any::<u64>(), amp in 1e-3f64..1.0) {
        let fast = MfccExtractor::new(MfccConfig::default()).unwrap();
        let x: Vec<f64> = random_signal(seed, len).into_iter().map(|v| v * amp).collect();
        let a = fast.compute(&x).unwrap();
        let b = NaiveMfcc::new().compute(&x);
        prop_assert!(max_abs_diff(&a.frames, &b) < 1e-6);
    }
}
