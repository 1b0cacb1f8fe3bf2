//! Audio preprocessing: crop, segment, augment, MFCC.

mod augment;
mod mfcc;
mod wav;

pub use augment::{
    add_noise, augment_segment, pitch_shift, AUGMENT_SEMITONES, AUGMENT_SNR_DB, MAX_PITCH_SHIFT,
};
pub use mfcc::{hz_to_mel, mel_to_hz, mfcc, MfccConfig, MfccExtractor, MfccMatrix};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use crate::{Error, Material, Result};

/// Segment hop used when building training sets, s.
pub const TRAIN_SEGMENT_HOP_S: f64 = 1.0;
/// Segment hop of the online classifier, s.
pub const ONLINE_SEGMENT_HOP_S: f64 = 0.25;

/// Mono audio with samples nominally in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        if samples.iter().any(|x| x.abs() > 1.0) {
            return Err(Error::invalid("waveform samples must lie in [-1, 1]"));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Exactly one second of audio cut from a trial.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSegment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_trial: String,
    pub offset_s: f64,
    pub label: Option<Material>,
}

impl AudioSegment {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: u32,
        source_trial: impl Into<String>,
        offset_s: f64,
        label: Option<Material>,
    ) -> Result<Self> {
        if samples.len() != sample_rate as usize {
            return Err(Error::ShapeMismatch(format!(
                "a segment holds {} samples, got {}",
                sample_rate,
                samples.len()
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("audio segment"));
        }
        Ok(AudioSegment {
            samples,
            sample_rate,
            source_trial: source_trial.into(),
            offset_s,
            label,
        })
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        AudioSegment {
            samples,
            ..self.clone()
        }
    }
}

fn to_sample(seconds: f64, sample_rate: u32) -> usize {
    (seconds * f64::from(sample_rate)).round() as usize
}

/// Samples in `[start_s, end_s)`.
pub fn crop_to_motion(w: &Waveform, start_s: f64, end_s: f64) -> Result<Waveform> {
    let duration = w.duration();
    let tol = 0.5 / f64::from(w.sample_rate);
    if !(start_s.is_finite() && end_s.is_finite())
        || start_s < 0.0
        || start_s >= end_s
        || end_s > duration + tol
    {
        return Err(Error::invalid(format!(
            "crop window [{start_s}, {end_s}) outside [0, {duration}]"
        )));
    }
    let a = to_sample(start_s, w.sample_rate);
    let b = to_sample(end_s, w.sample_rate).min(w.len());
    Ok(Waveform {
        samples: w.samples[a..b].to_vec(),
        sample_rate: w.sample_rate,
    })
}

/// One-second segments starting every `hop_s`; a trailing partial second is dropped.
pub fn segment(
    w: &Waveform,
    hop_s: f64,
    source_trial: &str,
    label: Option<Material>,
) -> Result<Vec<AudioSegment>> {
    let seg_len = w.sample_rate as usize;
    if w.len() < seg_len {
        return Err(Error::invalid(format!(
            "waveform of {:.3} s is shorter than one second",
            w.duration()
        )));
    }
    if !(hop_s.is_finite() && hop_s > 0.0) {
        return Err(Error::invalid("segment hop must be positive"));
    }
    let hop = to_sample(hop_s, w.sample_rate).max(1);
    let count = 1 + (w.len() - seg_len) / hop;
    (0..count)
        .map(|k| {
            let start = k * hop;
            AudioSegment::new(
                w.samples[start..start + seg_len].to_vec(),
                w.sample_rate,
                source_trial,
                start as f64 / f64::from(w.sample_rate),
                label,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(seconds: f64) -> Waveform {
        let n = (seconds * 16_000.0).round() as usize;
        Waveform::new((0..n).map(|i| (i % 1000) as f64 / 1000.0).collect(), 16_000).unwrap()
    }

    #[test]
    fn waveform_rejects_bad_input() {
        assert!(Waveform::new(vec![0.0, f64::NAN], 16_000).is_err());
        assert!(Waveform::new(vec![0.0, 1.5], 16_000).is_err());
        assert!(Waveform::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn crop_examples() {
        let w = ramp(10.0);
        assert_eq!(crop_to_motion(&w, 0.0, w.duration()).unwrap(), w);
        assert_eq!(crop_to_motion(&w, 2.0, 5.0).unwrap().len(), 48_000);
        assert!(crop_to_motion(&w, 5.0, 2.0).is_err());
        assert!(crop_to_motion(&w, -1.0, 2.0).is_err());
        assert!(crop_to_motion(&w, 1.0, 11.0).is_err());
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment(&ramp(3.0), 1.0, "t", None).unwrap().len(), 3);
        assert_eq!(segment(&ramp(3.5), 1.0, "t", None).unwrap().len(), 3);
        // 1 + floor((3.0 - 1.0) / 0.5)
        assert_eq!(segment(&ramp(3.0), 0.5, "t", None).unwrap().len(), 5);
        assert!(segment(&ramp(0.9), 1.0, "t", None).is_err());
        assert!(segment(&ramp(2.0), 0.0, "t", None).is_err());
    }

    #[test]
    fn segments_carry_provenance() {
        let segs = segment(&ramp(2.5), 0.5, "trial-7", Some(Material::Rice)).unwrap();
        assert!(segs
            .iter()
            .all(|s| s.source_trial == "trial-7" && s.label == Some(Material::Rice)));
        assert_eq!(segs[2].offset_s, 1.0);
        assert!(segs.iter().all(|s| s.samples.len() == 16_000));
    }

    proptest! {
        #[test]
        fn crop_composes(total in 16_000usize..64_000, a in 0usize..8_000, len1 in 16_000usize..40_000, b in 0usize..4_000, len2 in 1usize..8_000) {
            prop_assume!(a + len1 <= total && b + len2 <= len1);
            let sr = 16_000.0;
            let w = Waveform::new((0..total).map(|i| ((i * 7919) % 2001) as f64 / 1000.0 - 1.0).collect(), 16_000).unwrap();
            let outer = crop_to_motion(&w, a as f64 / sr, (a + len1) as f64 / sr).unwrap();
            let twice = crop_to_motion(&outer, b as f64 / sr, (b + len2) as f64 / sr).unwrap();
            let once = crop_to_motion(&w, (a + b) as f64 / sr, (a + b + len2) as f64 / sr).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn segment_after_crop_count_law(start in 0usize..20_000, len in 16_000usize..60_000, hop_ms in 100u32..1500) {
            let w = Waveform::new(vec![0.25; 90_000], 16_000).unwrap();
            let sr = 16_000.0;
            let cropped = crop_to_motion(&w, start as f64 / sr, (start + len) as f64 / sr).unwrap();
            prop_assert_eq!(cropped.len(), len);
            let hop_s = f64::from(hop_ms) / 1000.0;
            let hop = (hop_s * sr).round() as usize;
            let segs = segment(&cropped, hop_s, "t", None).unwrap();
            prop_assert_eq!(segs.len(), 1 + (len - 16_000) / hop);
            let last = segs.last().unwrap();
            prop_assert!(((last.offset_s * sr).round() as usize) + 16_000 <= len);
        }
    }
}
