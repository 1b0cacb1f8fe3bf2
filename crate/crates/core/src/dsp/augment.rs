//! Training-time augmentation: pitch shifting and additive noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AudioSegment;
use crate::{Error, Result};

/// One octave either way. Augmentation itself stays within ±2.
pub const MAX_PITCH_SHIFT: f64 = 12.0;
/// Shifts applied to each original segment; one variant per entry.
pub const AUGMENT_SEMITONES: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
pub const AUGMENT_SNR_DB: f64 = 20.0;

/// Linear-interpolation resampling by 2^(semitones/12), zero-padded or
/// trimmed back to the segment length.
pub fn pitch_shift(seg: &AudioSegment, semitones: f64) -> Result<AudioSegment> {
    if !(semitones.is_finite() && semitones.abs() <= MAX_PITCH_SHIFT) {
        return Err(Error::invalid(format!(
            "pitch shift {semitones} outside ±{MAX_PITCH_SHIFT} semitones"
        )));
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let x = &seg.samples;
    let last = x.len() - 1;
    let out = (0..x.len())
        .map(|n| {
            let pos = n as f64 * ratio;
            let i = pos.floor() as usize;
            if i > last {
                return 0.0;
            }
            let frac = pos - i as f64;
            if frac == 0.0 {
                x[i]
            } else if i < last {
                x[i] * (1.0 - frac) + x[i + 1] * frac
            } else {
                0.0
            }
        })
        .collect();
    Ok(seg.with_samples(out))
}

/// Adds seeded white Gaussian noise scaled so the realised signal-to-noise
/// ratio is exactly `snr_db`.
pub fn add_noise(seg: &AudioSegment, snr_db: f64, seed: u64) -> Result<AudioSegment> {
    if !snr_db.is_finite() {
        return Err(Error::NonFinite("snr"));
    }
    let n = seg.samples.len() as f64;
    let signal_power = seg.energy() / n;
    if !(signal_power > 0.0) {
        return Err(Error::invalid("signal has zero energy; SNR is undefined"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..seg.samples.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise_power = noise.iter().map(|x| x * x).sum::<f64>() / n;
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let gain = (target / noise_power).sqrt();
    let out = seg
        .samples
        .iter()
        .zip(&noise)
        .map(|(s, z)| s + gain * z)
        .collect();
    Ok(seg.with_samples(out))
}

/// The fixed augmentation policy: one noisy, pitch-shifted variant per entry
/// of [`AUGMENT_SEMITONES`]. Silent segments get pitch variants only.
pub fn augment_segment(seg: &AudioSegment, seed: u64) -> Result<Vec<AudioSegment>> {
    AUGMENT_SEMITONES
        .iter()
        .enumerate()
        .map(|(k, &st)| {
            let shifted = pitch_shift(seg, st)?;
            if shifted.energy() > 0.0 {
                add_noise(&shifted, AUGMENT_SNR_DB, seed.wrapping_add(k as u64))
            } else {
                Ok(shifted)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, amp: f64) -> AudioSegment {
        let samples = (0..16_000)
            .map(|n| amp * (2.0 * PI * freq * n as f64 / 16_000.0).sin())
            .collect();
        AudioSegment::new(samples, 16_000, "t", 0.0, None).unwrap()
    }

    /// Direct DFT magnitude at integer-Hz bins of a 1 s signal.
    fn dft_peak_hz(x: &[f64], lo: usize, hi: usize) -> usize {
        let n = x.len();
        (lo..=hi)
            .max_by(|&a, &b| {
                let mag = |k: usize| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, v) in x.iter().enumerate() {
                        let ph = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                        re += v * ph.cos();
                        im -= v * ph.sin();
                    }
                    re * re + im * im
                };
                mag(a).total_cmp(&mag(b))
            })
            .unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let t = tone(440.0, 0.5);
        let out = pitch_shift(&t, 0.0).unwrap();
        let dev = t
            .samples
            .iter()
            .zip(&out.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-9);
    }

    #[test]
    fn octave_up_doubles_frequency() {
        let shifted = pitch_shift(&tone(440.0, 0.5), 12.0).unwrap();
        // 1 s at 16 kHz: DFT bins are 1 Hz apart
        let peak = dft_peak_hz(&shifted.samples, 800, 960);
        assert!((peak as i64 - 880).abs() <= 1, "peak at {peak}");
    }

    #[test]
    fn output_length_is_fixed() {
        for st in [-12.0, -2.0, -0.3, 0.0, 1.0, 3.7, 12.0] {
            assert_eq!(
                pitch_shift(&tone(300.0, 0.2), st).unwrap().samples.len(),
                16_000
            );
        }
        assert!(pitch_shift(&tone(300.0, 0.2), 12.5).is_err());
        assert!(pitch_shift(&tone(300.0, 0.2), f64::NAN).is_err());
    }

    #[test]
    fn high_snr_is_nearly_transparent() {
        let t = tone(440.0, 2f64.sqrt());
        let out = add_noise(&t, 60.0, 5).unwrap();
        let dev = t
            .samples
            .iter()
            .zip(&out.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-2, "{dev}");
    }

    #[test]
    fn snr_10db_on_unit_power() {
        // amplitude sqrt(2) gives unit mean power
        let t = tone(440.0, 2f64.sqrt());
        let out = add_noise(&t, 10.0, 99).unwrap();
        let p: f64 = t
            .samples
            .iter()
            .zip(&out.samples)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            / 16_000.0;
        assert!((p - 0.1).abs() <= 0.005, "noise power {p}");
    }

    #[test]
    fn measured_snr_matches_request() {
        let t = tone(1234.0, 0.3);
        for snr in [0.0, 10.0, 20.0, 40.0] {
            let out = add_noise(&t, snr, 3).unwrap();
            let ps = t.energy();
            let pn: f64 = t
                .samples
                .iter()
                .zip(&out.samples)
                .map(|(a, b)| (b - a) * (b - a))
                .sum();
            let measured = 10.0 * (ps / pn).log10();
            assert!((measured - snr).abs() <= 0.5, "{snr} -> {measured}");
        }
    }

    #[test]
    fn noise_is_seeded() {
        let t = tone(440.0, 0.5);
        assert_eq!(
            add_noise(&t, 20.0, 1).unwrap(),
            add_noise(&t, 20.0, 1).unwrap()
        );
        assert_ne!(
            add_noise(&t, 20.0, 1).unwrap(),
            add_noise(&t, 20.0, 2).unwrap()
        );
    }

    #[test]
    fn silence_has_undefined_snr() {
        let s = AudioSegment::new(vec![0.0; 16_000], 16_000, "t", 0.0, None).unwrap();
        assert!(add_noise(&s, 20.0, 1).is_err());
        let aug = augment_segment(&s, 1).unwrap();
        assert_eq!(aug.len(), 4);
    }

    #[test]
    fn augmentation_emits_four_variants() {
        let aug = augment_segment(&tone(800.0, 0.3), 7).unwrap();
        assert_eq!(aug.len(), 4);
        assert!(aug.iter().all(|a| a.samples.len() == 16_000));
    }

    /// Correlation over the span where the round trip still has source
    /// material: a downward shift pushes the last 1 − 2^(s/12) of the segment
    /// past its end, and nothing can bring that back.
    fn round_trip_correlation(x: &[f64], s: f64) -> f64 {
        let seg = AudioSegment::new(x.to_vec(), 16_000, "t", 0.0, None).unwrap();
        let back = pitch_shift(&pitch_shift(&seg, s).unwrap(), -s).unwrap();
        let kept = if s < 0.0 {
            (x.len() as f64 * 2f64.powf(s / 12.0)).floor() as usize - 1
        } else {
            x.len()
        };
        let a = &x[..kept];
        let b = &back.samples[..kept];
        let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let na: f64 = a.iter().map(|p| p * p).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    proptest::proptest! {
        #[test]
        fn shift_round_trip_correlates(s in -2.0f64..2.0, f1 in 100.0f64..2500.0, f2 in 100.0f64..2500.0, seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p1, p2): (f64, f64) = (rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0);
            let x: Vec<f64> = (0..16_000)
                .map(|n| {
                    let t = n as f64 / 16_000.0;
                    0.4 * (2.0 * PI * f1 * t + p1).sin() + 0.3 * (2.0 * PI * f2 * t + p2).sin()
                })
                .collect();
            let c = round_trip_correlation(&x, s);
            proptest::prop_assert!(c > 0.95, "s={} corr={}", s, c);
        }
    }
}
