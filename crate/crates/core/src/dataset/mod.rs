//! On-disk trial format, dataset generation, splits and sample builders.

mod generate;
mod io;
mod manifest;
mod record;
mod samples;
mod split;

pub(crate) use generate::splitmix64;
pub use generate::{
    generate_dataset, sample_motion, trial_id, trial_seed, trial_setups, CollectionGrip,
    GenerateConfig, COLLECTION_GRIP,
};
pub use io::{
    encode_tactile_csv, encode_truth_csv, parse_meta, parse_tactile_csv, parse_truth_csv,
    read_trial, write_trial, FileDigest, TrialMeta, AUDIO_FILE, FORMAT_VERSION, META_FILE,
    TACTILE_FILE, TRUTH_FILE,
};
pub use manifest::{DatasetManifest, ManifestEntry, Split, SplitAssignment, MANIFEST_FILE};
pub use record::{StepTruth, TrialRecord};
pub use samples::{map_split, trial_segments, FeatureSequence};
pub use split::{build_splits, check_no_leakage, split_counts, DEFAULT_FRACTIONS};
