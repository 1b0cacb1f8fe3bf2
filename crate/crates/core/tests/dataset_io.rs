use std::collections::BTreeMap;
use std::path::Path;

use graspsense::controller::MotionSpec;
use graspsense::dataset::{
    build_splits, check_no_leakage, generate_dataset, read_trial, split_counts, trial_setups,
    CollectionGrip, DatasetManifest, GenerateConfig, ManifestEntry, Split, AUDIO_FILE,
    FORMAT_VERSION, META_FILE, TACTILE_FILE, TRUTH_FILE,
};
use graspsense::dsp::{MfccConfig, MfccExtractor};
use graspsense::pipeline::load_segments;
use graspsense::sim::run_trial;
use graspsense::{Error, Material};
use proptest::prelude::*;

fn small(seed: u64) -> GenerateConfig {
    GenerateConfig {
        trials_per_cell: 5,
        base_seed: seed,
        ..GenerateConfig::default()
    }
}

fn generate(seed: u64) -> (tempfile::TempDir, DatasetManifest) {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&small(seed), dir.path()).unwrap();
    (dir, m)
}

#[test]
fn regeneration_is_checksum_identical_and_records_round_trip() {
    let (a, ma) = generate(21);
    let (_b, mb) = generate(21);
    assert_eq!(ma, mb);
    assert_eq!(ma.content_digest(), mb.content_digest());
    assert_eq!(DatasetManifest::read(a.path()).unwrap(), ma);
    ma.verify_files(a.path()).unwrap();

    let (_c, mc) = generate(22);
    assert_ne!(ma.content_digest(), mc.content_digest());

    // stored records decode to exactly what the simulator produced
    let cfg = small(21);
    for setup in trial_setups(&cfg).iter().step_by(7) {
        let fresh = run_trial(
            setup,
            &mut CollectionGrip::for_trial(&cfg, setup.seed).unwrap(),
        )
        .unwrap();
        let stored = read_trial(&a.path().join(&setup.trial_id)).unwrap();
        assert_eq!(stored, fresh);
    }
}

#[test]
fn cells_and_splits_have_the_expected_sizes() {
    let (_d, m) = generate(3);
    assert_eq!(m.trials.len(), 50);
    assert_eq!(m.cell_counts().len(), 10);
    assert!(m.cell_counts().values().all(|&n| n == 5));
    let sizes: Vec<usize> = Split::ALL.iter().map(|&s| m.entries_in(s).len()).collect();
    assert_eq!(sizes, vec![30, 10, 10]);
    assert_eq!(split_counts(30, [0.6, 0.2, 0.2]).unwrap(), [18, 6, 6]);
}

fn first_trial(root: &Path, m: &DatasetManifest) -> std::path::PathBuf {
    root.join(&m.trials[0].dir)
}

#[test]
fn corruption_is_reported_by_kind() {
    let (d, m) = generate(5);
    let trial = first_trial(d.path(), &m);

    let tactile = trial.join(TACTILE_FILE);
    let original = std::fs::read(&tactile).unwrap();
    let mut flipped = original.clone();
    let i = flipped.len() / 2;
    flipped[i] = if flipped[i] == b'1' { b'2' } else { b'1' };
    std::fs::write(&tactile, &flipped).unwrap();
    assert!(matches!(read_trial(&trial), Err(Error::Checksum { .. })));
    assert!(matches!(
        m.verify_files(d.path()),
        Err(Error::Checksum { .. })
    ));
    std::fs::write(&tactile, &original).unwrap();

    let audio = trial.join(AUDIO_FILE);
    let wav = std::fs::read(&audio).unwrap();
    std::fs::write(&audio, &wav[..wav.len() - 100]).unwrap();
    assert!(matches!(read_trial(&trial), Err(Error::Truncated { .. })));
    std::fs::write(&audio, &wav).unwrap();

    let meta = trial.join(META_FILE);
    let text = std::fs::read_to_string(&meta).unwrap();
    let bumped = text.replace(
        &format!("\"format_version\": {FORMAT_VERSION}"),
        &format!("\"format_version\": {}", FORMAT_VERSION + 1),
    );
    assert_ne!(bumped, text);
    std::fs::write(&meta, bumped).unwrap();
    assert!(
        matches!(read_trial(&trial), Err(Error::Version { found, .. }) if found == FORMAT_VERSION + 1)
    );
    std::fs::write(&meta, &text).unwrap();

    std::fs::remove_file(trial.join(TRUTH_FILE)).unwrap();
    assert!(matches!(read_trial(&trial), Err(Error::Io { .. })));
}

#[test]
fn manifest_version_and_output_directory_are_checked() {
    let (d, m) = generate(6);
    let path = d.path().join("manifest.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(
        &path,
        text.replacen(
            &format!("\"format_version\": {FORMAT_VERSION}"),
            "\"format_version\": 99",
            1,
        ),
    )
    .unwrap();
    assert!(matches!(
        DatasetManifest::read(d.path()),
        Err(Error::Version { found: 99, .. })
    ));
    std::fs::write(&path, m.to_json().unwrap()).unwrap();
    assert!(matches!(
        generate_dataset(&small(6), d.path()),
        Err(Error::NonEmptyOutput(_))
    ));
}

#[test]
fn segments_never_cross_split_boundaries() {
    let (d, m) = generate(8);
    let extractor = MfccExtractor::new(MfccConfig::default()).unwrap();
    let mut items = Vec::new();
    for split in Split::ALL {
        for (_, seg) in load_segments(d.path(), &m, split, &extractor, Some(1)).unwrap() {
            assert_eq!(m.split_of(&seg.source_trial), Some(split));
            items.push((split, seg.source_trial));
        }
    }
    check_no_leakage(items.iter().map(|(s, t)| (*s, t.as_str()))).unwrap();
    let mut leaked = items.clone();
    leaked.push((Split::Test, items[0].1.clone()));
    assert!(check_no_leakage(leaked.iter().map(|(s, t)| (*s, t.as_str()))).is_err());
}

fn synthetic_manifest(cell_sizes: &[usize]) -> DatasetManifest {
    let mut trials = Vec::new();
    for (k, &n) in cell_sizes.iter().enumerate() {
        let material = Material::from_index(k % Material::COUNT).unwrap();
        let motion = if k < Material::COUNT {
            MotionSpec::Shaking {
                shake_count: 3,
                peak_accel: 5.0,
                freq_hz: 3.0,
            }
        } else {
            MotionSpec::Rotation {
                range_rad: 1.0,
                freq_hz: 1.0,
                duration_s: 3.0,
            }
        };
        for i in 0..n {
            let id = format!("{k}-{i}");
            trials.push(ManifestEntry {
                id: id.clone(),
                material,
                motion,
                seed: i as u64,
                dir: id,
                files: BTreeMap::new(),
            });
        }
    }
    DatasetManifest {
        format_version: FORMAT_VERSION,
        base_seed: 0,
        trials_per_cell: 0,
        trials,
        splits: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn split_assignment_is_a_stratified_partition(
        cell_sizes in prop::collection::vec(5usize..40, 1..=10),
        seed in any::<u64>(),
    ) {
        let m = build_splits(&synthetic_manifest(&cell_sizes), [0.6, 0.2, 0.2], seed).unwrap();
        let assignment = &m.splits.as_ref().unwrap().assignment;
        prop_assert_eq!(assignment.len(), m.trials.len());
        check_no_leakage(assignment.iter().map(|(id, s)| (*s, id.as_str()))).unwrap();
        for (k, &n) in cell_sizes.iter().enumerate() {
            let expected = split_counts(n, [0.6, 0.2, 0.2]).unwrap();
            for (split, want) in Split::ALL.into_iter().zip(expected) {
                let got = (0..n).filter(|i| m.split_of(&format!("{k}-{i}")) == Some(split)).count();
                prop_assert_eq!(got, want);
            }
        }
        let again = build_splits(&synthetic_manifest(&cell_sizes), [0.6, 0.2, 0.2], seed).unwrap();
        prop_assert_eq!(&again.splits, &m.splits);
    }
}
