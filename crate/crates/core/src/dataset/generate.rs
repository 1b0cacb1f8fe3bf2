//! Dataset generation: every (motion, material) cell gets `trials_per_cell`
//! trials, each with its own derived seed. Half the trials hold the 0.4 Nm
//! base grip and the rest a seeded grip between the base and the cap, so the
//! predictors see the torques the controller commands. With grip excursions
//! off every trial holds the base grip.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{write_trial, META_FILE};
use super::manifest::{empty_manifest, meta_digest, DatasetManifest, ManifestEntry};
use super::split::{build_splits, DEFAULT_FRACTIONS};
use crate::controller::grip::STIFF_SCALE;
use crate::controller::motion::{MotionKind, MotionSpec};
use crate::sim::trial::DEFAULT_REST_S;
use crate::sim::{run_trial, GripCommand, GripPolicy, SimObservation, TrialSetup, MAX_GRIP_TORQUE};
use crate::{Error, Material, Result};

/// Base grip during data collection, Nm.
pub const COLLECTION_GRIP: f64 = 0.4;

const STIFFEN_CHANCE: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub grip_torque: f64,
    /// Vary the grip between the base torque and the cap; off holds the base.
    pub grip_excursions: bool,
    pub rest_s: f64,
    pub fractions: [f64; 3],
    /// Allow writing into a non-empty directory.
    pub overwrite: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            trials_per_cell: 30,
            base_seed: 0,
            grip_torque: COLLECTION_GRIP,
            grip_excursions: true,
            rest_s: DEFAULT_REST_S,
            fractions: DEFAULT_FRACTIONS,
            overwrite: false,
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: a splitmix64 chain over (base, material, motion, index).
pub fn trial_seed(base_seed: u64, material: Material, motion: MotionKind, index: usize) -> u64 {
    let motion_tag = MotionKind::ALL
        .iter()
        .position(|m| *m == motion)
        .unwrap_or(0) as u64;
    [material.index() as u64, motion_tag, index as u64]
        .into_iter()
        .fold(splitmix64(base_seed), |h, x| splitmix64(h ^ x))
}

/// Motion parameters for one collection trial.
///
/// Shaking: peak 3 to 16 m/s² at 2 to 4 Hz, enough shakes for at least 3 s.
/// Rotation: 0.5 to 1.2 rad at 0.5 to 1.5 Hz for 3 s.
pub fn sample_motion(kind: MotionKind, seed: u64) -> MotionSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6d6f_7469_6f6e));
    match kind {
        MotionKind::Shaking => {
            let freq_hz = rng.random_range(2.0f64..4.0);
            MotionSpec::Shaking {
                shake_count: (3.0 * freq_hz).ceil() as u32,
                peak_accel: rng.random_range(3.0..16.0),
                freq_hz,
            }
        }
        MotionKind::Rotation => MotionSpec::Rotation {
            range_rad: rng.random_range(0.5..1.2),
            freq_hz: rng.random_range(0.5..1.5),
            duration_s: 3.0,
        },
    }
}

/// Grip held through one collection trial: the base torque with probability
/// 1/2, otherwise a uniform torque between the base and the cap that also
/// doubles the joint stiffness 40% of the time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollectionGrip(pub GripCommand);

impl CollectionGrip {
    pub fn new(base: f64, excursions: bool, seed: u64) -> Result<Self> {
        if !(base.is_finite() && (0.0..=MAX_GRIP_TORQUE).contains(&base)) {
            return Err(Error::invalid(format!(
                "collection grip {base} outside [0, {MAX_GRIP_TORQUE}] Nm"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6772_6970));
        if !excursions || rng.random_bool(0.5) || base >= MAX_GRIP_TORQUE {
            return Ok(CollectionGrip(GripCommand::new(base)));
        }
        Ok(CollectionGrip(GripCommand {
            torque: rng.random_range(base..=MAX_GRIP_TORQUE),
            stiffness: if rng.random_bool(STIFFEN_CHANCE) {
                STIFF_SCALE
            } else {
                1.0
            },
        }))
    }

    pub fn for_trial(cfg: &GenerateConfig, seed: u64) -> Result<Self> {
        Self::new(cfg.grip_torque, cfg.grip_excursions, seed)
    }
}

impl GripPolicy for CollectionGrip {
    fn command(&mut self, _last: Option<&SimObservation>) -> Result<GripCommand> {
        Ok(self.0)
    }
}

pub fn trial_id(material: Material, motion: MotionKind, index: usize) -> String {
    format!("{material}-{motion}-{index:03}")
}

/// All collection trials in canonical order: motion, then material, then index.
pub fn trial_setups(cfg: &GenerateConfig) -> Vec<TrialSetup> {
    let mut out = Vec::with_capacity(cfg.trials_per_cell * MotionKind::ALL.len() * Material::COUNT);
    for motion in MotionKind::ALL {
        for material in Material::ALL {
            for index in 0..cfg.trials_per_cell {
                let seed = trial_seed(cfg.base_seed, material, motion, index);
                out.push(TrialSetup {
                    trial_id: trial_id(material, motion, index),
                    material,
                    motion: sample_motion(motion, seed),
                    seed,
                    rest_s: cfg.rest_s,
                });
            }
        }
    }
    out
}

fn is_empty_dir(dir: &Path) -> Result<bool> {
    match std::fs::read_dir(dir) {
        Ok(mut it) => Ok(it.next().is_none()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(Error::io(dir, e)),
    }
}

/// Generates, writes and indexes a dataset. Trials run in parallel; the
/// manifest lists them in canonical order. Splits are attached when every
/// cell is large enough to stratify.
pub fn generate_dataset(cfg: &GenerateConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if cfg.trials_per_cell == 0 {
        return Err(Error::invalid("trials_per_cell must be at least 1"));
    }
    if !cfg.overwrite && !is_empty_dir(out_dir)? {
        return Err(Error::NonEmptyOutput(out_dir.to_path_buf()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    CollectionGrip::new(cfg.grip_torque, cfg.grip_excursions, 0)?;
    let setups = trial_setups(cfg);
    let entries = setups
        .par_iter()
        .map(|setup| {
            let record = run_trial(setup, &mut CollectionGrip::for_trial(cfg, setup.seed)?)?;
            let dir = out_dir.join(&setup.trial_id);
            let meta = write_trial(&dir, &record)?;
            let mut files = meta.files;
            files.insert(META_FILE.to_string(), meta_digest(&dir)?);
            Ok(ManifestEntry {
                id: setup.trial_id.clone(),
                material: setup.material,
                motion: setup.motion,
                seed: setup.seed,
                dir: setup.trial_id.clone(),
                files,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = empty_manifest(cfg.base_seed, cfg.trials_per_cell);
    manifest.trials = entries;
    match build_splits(&manifest, cfg.fractions, cfg.base_seed) {
        Ok(split) => manifest = split,
        Err(e) => log::warn!("dataset left unsplit: {e}"),
    }
    manifest.write(out_dir)?;
    log::info!(
        "generated {} trials in {}",
        manifest.trials.len(),
        out_dir.display()
    );
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn seeds_are_distinct_across_cells() {
        let cfg = GenerateConfig::default();
        let seeds: BTreeSet<u64> = trial_setups(&cfg).iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), 300);
    }

    #[test]
    fn setups_cover_ten_cells_of_thirty() {
        let setups = trial_setups(&GenerateConfig::default());
        assert_eq!(setups.len(), 300);
        for motion in MotionKind::ALL {
            for material in Material::ALL {
                let n = setups
                    .iter()
                    .filter(|s| s.material == material && s.motion.kind() == motion)
                    .count();
                assert_eq!(n, 30);
            }
        }
    }

    #[test]
    fn sampled_motions_last_at_least_three_seconds() {
        for i in 0..200 {
            for kind in MotionKind::ALL {
                let p = sample_motion(kind, i).profile().unwrap();
                assert!(p.duration >= 3.0 - 1e-9);
            }
        }
    }

    #[test]
    fn collection_grip_spans_base_to_cap() {
        let cfg = GenerateConfig::default();
        let cmds: Vec<GripCommand> = (0..2000)
            .map(|seed| CollectionGrip::for_trial(&cfg, seed).unwrap().0)
            .collect();
        assert!(cmds.iter().all(|c| (0.4..=1.0).contains(&c.torque)));
        let at_base = cmds.iter().filter(|c| *c == &GripCommand::new(0.4)).count();
        assert!((900..1100).contains(&at_base), "{at_base}");
        assert!(cmds.iter().any(|c| c.torque > 0.9));
        assert!(cmds.iter().any(|c| c.stiffness == STIFF_SCALE));
        let fixed = CollectionGrip::new(0.4, false, 7).unwrap();
        assert_eq!(fixed.0, GripCommand::new(0.4));
    }

    #[test]
    fn seed_depends_on_every_component() {
        let s = trial_seed(1, Material::Rice, MotionKind::Shaking, 0);
        assert_ne!(s, trial_seed(2, Material::Rice, MotionKind::Shaking, 0));
        assert_ne!(s, trial_seed(1, Material::Cereal, MotionKind::Shaking, 0));
        assert_ne!(s, trial_seed(1, Material::Rice, MotionKind::Rotation, 0));
        assert_ne!(s, trial_seed(1, Material::Rice, MotionKind::Shaking, 1));
    }
}
