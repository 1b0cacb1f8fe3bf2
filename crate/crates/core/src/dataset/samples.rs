//! Turning stored trials into model inputs: audio segments for the classifier
//! and feature sequences with look-ahead targets for the predictor.

use std::path::Path;

use rayon::prelude::*;

use super::io::read_trial;
use super::manifest::{DatasetManifest, ManifestEntry, Split};
use super::record::{StepTruth, TrialRecord};
use crate::controller::motion::MotionKind;
use crate::dsp::{segment, AudioSegment};
use crate::tactile::{feature_vector, FEATURE_DIM};
use crate::{Error, Material, Result};

/// One-second segments of the pre-drop motion span, labelled with the material.
pub fn trial_segments(record: &TrialRecord, hop_s: f64) -> Result<Vec<AudioSegment>> {
    match record.motion_audio()? {
        Some(w) if w.duration() >= 1.0 => {
            segment(&w, hop_s, &record.trial_id, Some(record.material)).map(|mut segs| {
                let start = record.motion_start_s;
                segs.iter_mut().for_each(|s| s.offset_s += start);
                segs
            })
        }
        _ => Ok(Vec::new()),
    }
}

/// Per-step features and ground truth of one trial, the predictor's raw input.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub trial_id: String,
    pub material: Material,
    pub motion: MotionKind,
    /// One [`FEATURE_DIM`]-vector per step; rates at step 0 are zero.
    pub features: Vec<Vec<f64>>,
    pub truth: Vec<StepTruth>,
}

impl FeatureSequence {
    pub fn from_record(record: &TrialRecord) -> Result<Self> {
        let mut features = Vec::with_capacity(record.steps());
        for (i, frame) in record.tactile.iter().enumerate() {
            let prev = i.checked_sub(1).map(|p| &record.tactile[p]);
            features.push(feature_vector(prev, frame)?.to_vec());
        }
        debug_assert!(features.iter().all(|f| f.len() == FEATURE_DIM));
        Ok(FeatureSequence {
            trial_id: record.trial_id.clone(),
            material: record.material,
            motion: record.motion.kind(),
            features,
            truth: record.truth.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// End steps `e` of every width-`width` window whose target step
    /// `e + horizon` exists and for which nothing in `[e − width + 1, e + horizon]`
    /// has dropped.
    pub fn window_ends(&self, width: usize, horizon: usize) -> Vec<usize> {
        if width == 0 || self.len() < width + horizon {
            return Vec::new();
        }
        let limit = self
            .truth
            .iter()
            .position(|s| s.dropped)
            .unwrap_or(self.len());
        (width - 1..self.len() - horizon)
            .filter(|&e| e + horizon < limit)
            .collect()
    }

    pub fn window(&self, end: usize, width: usize) -> &[Vec<f64>] {
        &self.features[end + 1 - width..=end]
    }

    pub fn target(&self, end: usize, horizon: usize) -> &StepTruth {
        &self.truth[end + horizon]
    }
}

/// Loads every trial of `split` in parallel and maps it through `f`,
/// keeping manifest order.
pub fn map_split<T, F>(
    root: &Path,
    manifest: &DatasetManifest,
    split: Split,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ManifestEntry, TrialRecord) -> Result<T> + Sync,
{
    if manifest.splits.is_none() {
        return Err(Error::invalid("dataset has no split assignment"));
    }
    manifest
        .entries_in(split)
        .par_iter()
        .map(|entry| {
            let record = read_trial(&root.join(&entry.dir))?;
            if record.trial_id != entry.id {
                return Err(Error::malformed(
                    entry.dir.clone(),
                    format!(
                        "trial id {:?} does not match manifest id {:?}",
                        record.trial_id, entry.id
                    ),
                ));
            }
            f(entry, record)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::motion::MotionSpec;
    use crate::sim::{run_trial, FixedGrip, TrialSetup};

    fn record(material: Material, peak: f64, grip: f64) -> TrialRecord {
        let motion = MotionSpec::Shaking {
            shake_count: 9,
            peak_accel: peak,
            freq_hz: 3.0,
        };
        run_trial(
            &TrialSetup::new("x", material, motion, 5),
            &mut FixedGrip(grip),
        )
        .unwrap()
    }

    #[test]
    fn segments_stay_inside_the_motion() {
        let r = record(Material::Vitamins, 6.0, 0.4);
        let segs = trial_segments(&r, 1.0).unwrap();
        assert_eq!(segs.len(), 3);
        for s in &segs {
            assert!(s.offset_s >= r.motion_start_s - 1e-9);
            assert!(s.offset_s + 1.0 <= r.motion_end_s + 1e-9);
            assert_eq!(s.label, Some(Material::Vitamins));
        }
    }

    #[test]
    fn windows_stop_before_the_drop() {
        let r = record(Material::Rice, 16.0, 0.1);
        let drop = r
            .first_drop_step()
            .expect("a weak grip under hard shaking drops");
        let seq = FeatureSequence::from_record(&r).unwrap();
        let ends = seq.window_ends(10, 10);
        assert_eq!(ends.first(), Some(&9));
        assert!(ends.iter().all(|&e| e + 10 < drop));
        assert_eq!(ends.len(), drop - 19);
    }

    #[test]
    fn zero_horizon_targets_the_current_step() {
        let r = record(Material::Cereal, 4.0, 0.4);
        let seq = FeatureSequence::from_record(&r).unwrap();
        let e = seq.window_ends(10, 0)[5];
        assert_eq!(seq.target(e, 0), &r.truth[e]);
        assert_eq!(seq.window(e, 10).len(), 10);
    }
}
