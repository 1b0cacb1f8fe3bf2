//! The active identification loop: pick a motion, run a one-second probe,
//! classify its audio, update the posterior, repeat.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{select_motion, update_posterior, MotionLikelihoodModel, Posterior, K};
use crate::controller::motion::{MotionKind, MotionSpec};
use crate::dataset::splitmix64;
use crate::dsp::MfccExtractor;
use crate::models::{argmax, LabeledMfcc, MaterialClassifier};
use crate::sim::{run_trial, FixedGrip, TrialSetup};
use crate::{Error, Material, Result};

/// Probes are run at full grip so the contents stay in hand.
pub const ACTIVE_GRIP: f64 = 1.0;

/// One-second probe for each motion kind.
pub fn action_motion(kind: MotionKind) -> MotionSpec {
    match kind {
        MotionKind::Shaking => MotionSpec::Shaking {
            shake_count: 3,
            peak_accel: 8.0,
            freq_hz: 3.0,
        },
        MotionKind::Rotation => MotionSpec::Rotation {
            range_rad: 0.8,
            freq_hz: 1.0,
            duration_s: 1.0,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Eig,
    Random,
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Selector::Eig => "eig",
            Selector::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveStep {
    pub segment: usize,
    pub motion: MotionKind,
    pub predicted: Material,
    /// Posterior after this segment.
    pub posterior: Posterior,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveLog {
    pub material: Material,
    pub seed: u64,
    pub selector: Selector,
    pub confidence_target: f64,
    pub max_segments: usize,
    pub steps: Vec<ActiveStep>,
    /// Whether the posterior maximum reached the target.
    pub reached: bool,
}

pub const ACTIVE_CSV_HEADER: &str =
    "segment,motion,predicted,p_rice,p_cereal,p_gummies,p_vitamins,p_empty,entropy";

impl ActiveLog {
    pub fn segments_used(&self) -> usize {
        self.steps.len()
    }

    pub fn budget_exhausted(&self) -> bool {
        !self.reached
    }

    pub fn final_posterior(&self) -> Posterior {
        self.steps
            .last()
            .map(|s| s.posterior.clone())
            .unwrap_or_else(Posterior::uniform)
    }

    /// Maximum-posterior class at the end of the run.
    pub fn estimate(&self) -> Material {
        Material::from_index(self.final_posterior().map_class()).expect("class index in range")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(ACTIVE_CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            write!(out, "{},{},{}", s.segment, s.motion, s.predicted).unwrap();
            for p in s.posterior.probs() {
                write!(out, ",{p}").unwrap();
            }
            writeln!(out, ",{}", s.entropy).unwrap();
        }
        out
    }
}

/// Confusion counts of `classifier` on labelled held-out segments, grouped by
/// the motion that produced them, turned into Laplace-smoothed likelihoods.
pub fn build_likelihood(
    classifier: &MaterialClassifier,
    data: &[(MotionKind, LabeledMfcc)],
) -> Result<MotionLikelihoodModel> {
    let mut counts: BTreeMap<MotionKind, [[usize; K]; K]> = BTreeMap::new();
    for (motion, sample) in data {
        let predicted = argmax(&classifier.classify(&sample.mfcc)?);
        counts.entry(*motion).or_insert([[0; K]; K])[sample.label.index()][predicted] += 1;
    }
    if counts.is_empty() {
        return Err(Error::EmptyDataset(
            "no held-out segments for the likelihood model".into(),
        ));
    }
    MotionLikelihoodModel::from_counts(&counts)
}

/// Simulator seed of probe `segment`; shared by every selector so runs with
/// the same seed see the same noise.
fn probe_seed(seed: u64, segment: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ segment as u64)
}

pub fn run_active_loop(
    material: Material,
    classifier: &MaterialClassifier,
    l: &MotionLikelihoodModel,
    confidence_target: f64,
    max_segments: usize,
    seed: u64,
    selector: Selector,
) -> Result<ActiveLog> {
    if !(confidence_target > 0.2 && confidence_target < 1.0) {
        return Err(Error::invalid("confidence target must lie in (0.2, 1)"));
    }
    if max_segments == 0 {
        return Err(Error::invalid("segment budget must be positive"));
    }
    let motions = l.motions();
    let extractor = MfccExtractor::new(classifier.mfcc_config().clone())?;
    let mut pick_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x7069_636b));
    let mut posterior = Posterior::uniform();
    let mut steps = Vec::new();
    let mut reached = false;
    for segment in 0..max_segments {
        let motion = match selector {
            Selector::Eig => select_motion(&posterior, &motions, l)?,
            Selector::Random => motions[pick_rng.random_range(0..motions.len())],
        };
        let mut setup = TrialSetup::new(
            format!("probe-{material}-{seed}-{segment}"),
            material,
            action_motion(motion),
            probe_seed(seed, segment),
        );
        setup.rest_s = 0.0;
        let record = run_trial(&setup, &mut FixedGrip::new(ACTIVE_GRIP)?)?;
        // the motion profile can run a step past one second; classify the first second
        let samples = record.audio.samples();
        let segment_len = (classifier.mfcc_config().sample_rate as usize).min(samples.len());
        let probs = classifier.classify(&extractor.compute(&samples[..segment_len])?)?;
        let observed = argmax(&probs);
        posterior = update_posterior(&posterior, motion, observed, l)?;
        steps.push(ActiveStep {
            segment,
            motion,
            predicted: Material::from_index(observed).expect("class index in range"),
            entropy: posterior.entropy_bits(),
            posterior: posterior.clone(),
        });
        if posterior.max_prob() >= confidence_target {
            reached = true;
            break;
        }
    }
    Ok(ActiveLog {
        material,
        seed,
        selector,
        confidence_target,
        max_segments,
        steps,
        reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_last_one_second() {
        for kind in MotionKind::ALL {
            let p = action_motion(kind).profile().unwrap();
            assert!((p.duration - 1.0).abs() < 1e-9, "{kind}");
        }
    }

    #[test]
    fn probe_seeds_differ_per_segment() {
        assert_ne!(probe_seed(1, 0), probe_seed(1, 1));
        assert_ne!(probe_seed(1, 0), probe_seed(2, 0));
    }
}
