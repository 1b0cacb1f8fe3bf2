//! Train/val/test assignment by trial, stratified per (motion, material) cell.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{DatasetManifest, Split, SplitAssignment};
use crate::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.6, 0.2, 0.2];

/// Per-cell (train, val, test) sizes: rounded train and val, test takes the rest.
pub fn split_counts(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid(
            "split fractions must be non-negative and sum to 1",
        ));
    }
    let train = (fractions[0] * n as f64).round() as usize;
    let val = (fractions[1] * n as f64).round() as usize;
    let counts = [train, val, n.saturating_sub(train + val)];
    let fits = train + val <= n;
    let nonempty = counts
        .iter()
        .zip(&fractions)
        .all(|(c, f)| *f == 0.0 || *c > 0);
    if !fits || !nonempty {
        return Err(Error::invalid(format!(
            "a cell of {n} trials is too small to stratify at {fractions:?}"
        )));
    }
    Ok(counts)
}

pub fn build_splits(
    manifest: &DatasetManifest,
    fractions: [f64; 3],
    seed: u64,
) -> Result<DatasetManifest> {
    let mut cells: BTreeMap<_, Vec<&str>> = BTreeMap::new();
    for t in &manifest.trials {
        cells
            .entry((t.motion_kind(), t.material))
            .or_default()
            .push(&t.id);
    }
    let mut assignment = BTreeMap::new();
    for (k, ((motion, material), mut ids)) in cells.into_iter().enumerate() {
        let counts = split_counts(ids.len(), fractions)
            .map_err(|e| Error::invalid(format!("cell ({motion}, {material}): {e}")))?;
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x2545_F491_4F6C_DD1D)
                .wrapping_add(k as u64),
        );
        ids.shuffle(&mut rng);
        let mut it = ids.into_iter();
        for (split, n) in Split::ALL.into_iter().zip(counts) {
            for id in it.by_ref().take(n) {
                assignment.insert(id.to_string(), split);
            }
        }
    }
    let mut out = manifest.clone();
    out.splits = Some(SplitAssignment {
        seed,
        fractions,
        assignment,
    });
    out.validate()?;
    Ok(out)
}

/// Fails if any source trial shows up under more than one split.
pub fn check_no_leakage<'a>(items: impl IntoIterator<Item = (Split, &'a str)>) -> Result<()> {
    let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
    let mut leaked = BTreeSet::new();
    for (split, trial) in items {
        match seen.insert(trial, split) {
            Some(prev) if prev != split => {
                leaked.insert(trial);
            }
            _ => {}
        }
    }
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "trials present in more than one split: {leaked:?}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::motion::MotionKind;
    use crate::dataset::generate::{sample_motion, trial_id};
    use crate::dataset::manifest::{empty_manifest, ManifestEntry};
    use crate::Material;

    fn manifest(per_cell: usize) -> DatasetManifest {
        let mut m = empty_manifest(0, per_cell);
        for motion in MotionKind::ALL {
            for material in Material::ALL {
                for i in 0..per_cell {
                    let id = trial_id(material, motion, i);
                    m.trials.push(ManifestEntry {
                        id: id.clone(),
                        material,
                        motion: sample_motion(motion, i as u64),
                        seed: i as u64,
                        dir: id,
                        files: Default::default(),
                    });
                }
            }
        }
        m
    }

    #[test]
    fn thirty_trial_cell_splits_18_6_6() {
        assert_eq!(split_counts(30, DEFAULT_FRACTIONS).unwrap(), [18, 6, 6]);
        let m = build_splits(&manifest(30), DEFAULT_FRACTIONS, 4).unwrap();
        for motion in MotionKind::ALL {
            for material in Material::ALL {
                let count = |s: Split| {
                    m.entries_in(s)
                        .iter()
                        .filter(|t| t.material == material && t.motion_kind() == motion)
                        .count()
                };
                assert_eq!(
                    [count(Split::Train), count(Split::Val), count(Split::Test)],
                    [18, 6, 6]
                );
            }
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let base = manifest(10);
        let a = build_splits(&base, DEFAULT_FRACTIONS, 1).unwrap();
        let b = build_splits(&base, DEFAULT_FRACTIONS, 1).unwrap();
        let c = build_splits(&base, DEFAULT_FRACTIONS, 2).unwrap();
        assert_eq!(a.splits, b.splits);
        assert_ne!(a.splits.unwrap().assignment, c.splits.unwrap().assignment);
    }

    #[test]
    fn tiny_cells_are_refused() {
        assert!(build_splits(&manifest(1), DEFAULT_FRACTIONS, 0).is_err());
        assert!(build_splits(&manifest(2), DEFAULT_FRACTIONS, 0).is_err());
        assert!(split_counts(10, [0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn leakage_scan() {
        assert!(
            check_no_leakage([(Split::Train, "a"), (Split::Train, "a"), (Split::Test, "b")])
                .is_ok()
        );
        assert!(check_no_leakage([(Split::Train, "a"), (Split::Test, "a")]).is_err());
    }
}
