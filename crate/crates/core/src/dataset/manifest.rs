//! `manifest.json`: the dataset's table of contents.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "base_seed": 7,
//!   "trials_per_cell": 30,
//!   "trials": [
//!     {"id": "rice-shaking-000", "material": "rice", "motion": {"kind": "shaking", ...},
//!      "seed": 123, "dir": "rice-shaking-000",
//!      "files": {"audio.wav": {"crc32": 1, "bytes": 2}, "meta.json": ..., ...}}
//!   ],
//!   "splits": {"seed": 7, "fractions": [0.6, 0.2, 0.2], "assignment": {"rice-shaking-000": "train", ...}}
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::io::{check_version, FileDigest, FORMAT_VERSION, META_FILE};
use crate::controller::motion::{MotionKind, MotionSpec};
use crate::{Error, Material, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown split {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub material: Material,
    pub motion: MotionSpec,
    pub seed: u64,
    /// Trial directory relative to the dataset root.
    pub dir: String,
    pub files: BTreeMap<String, FileDigest>,
}

impl ManifestEntry {
    pub fn motion_kind(&self) -> MotionKind {
        self.motion.kind()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAssignment {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub assignment: BTreeMap<String, Split>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub base_seed: u64,
    pub trials_per_cell: usize,
    pub trials: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitAssignment>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::malformed(MANIFEST_FILE, e.to_string()))
    }

    /// Parses and validates structure (version, unique ids, safe paths,
    /// split partition). File checksums are checked by [`verify_files`](Self::verify_files).
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let value = check_version(Path::new(MANIFEST_FILE), bytes)?;
        let manifest: DatasetManifest = serde_json::from_value(value)
            .map_err(|e| Error::malformed(MANIFEST_FILE, e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for t in &self.trials {
            if !ids.insert(t.id.as_str()) {
                return Err(Error::malformed(
                    MANIFEST_FILE,
                    format!("duplicate trial id {:?}", t.id),
                ));
            }
            let dir = Path::new(&t.dir);
            let safe = !t.dir.is_empty()
                && dir
                    .components()
                    .all(|c| matches!(c, std::path::Component::Normal(_)));
            if !safe {
                return Err(Error::malformed(
                    MANIFEST_FILE,
                    format!("unsafe trial dir {:?}", t.dir),
                ));
            }
        }
        if let Some(s) = &self.splits {
            if s.fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0))
                || (s.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::malformed(
                    MANIFEST_FILE,
                    "split fractions must be non-negative and sum to 1",
                ));
            }
            let assigned: BTreeSet<&str> = s.assignment.keys().map(String::as_str).collect();
            if assigned != ids {
                return Err(Error::malformed(
                    MANIFEST_FILE,
                    "split assignment does not cover exactly the listed trials",
                ));
            }
        }
        Ok(())
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&bytes).map_err(|e| match e {
            Error::Version {
                found, expected, ..
            } => Error::Version {
                file: path.clone(),
                found,
                expected,
            },
            other => other,
        })
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(&path, e))
    }

    /// Recomputes every recorded file digest under `root`.
    pub fn verify_files(&self, root: &Path) -> Result<()> {
        for t in &self.trials {
            for (name, digest) in &t.files {
                let path = root.join(&t.dir).join(name);
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                digest.check(&path, &bytes)?;
            }
        }
        Ok(())
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits
            .as_ref()
            .and_then(|s| s.assignment.get(id).copied())
    }

    pub fn entries_in(&self, split: Split) -> Vec<&ManifestEntry> {
        self.trials
            .iter()
            .filter(|t| self.split_of(&t.id) == Some(split))
            .collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.trials.iter().find(|t| t.id == id)
    }

    /// Trial counts per (motion, material) cell.
    pub fn cell_counts(&self) -> BTreeMap<(MotionKind, Material), usize> {
        let mut counts = BTreeMap::new();
        for t in &self.trials {
            *counts.entry((t.motion_kind(), t.material)).or_insert(0) += 1;
        }
        counts
    }

    /// The manifest-level digest of a whole dataset: CRC32 over the sorted
    /// (id, file, crc) triples.
    pub fn content_digest(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        let mut rows: Vec<String> = self
            .trials
            .iter()
            .flat_map(|t| {
                t.files
                    .iter()
                    .map(move |(n, d)| format!("{}/{}:{:08x}", t.id, n, d.crc32))
            })
            .collect();
        rows.sort();
        for r in rows {
            h.update(r.as_bytes());
        }
        h.finalize()
    }
}

pub(crate) fn meta_digest(dir: &Path) -> Result<FileDigest> {
    let path = dir.join(META_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(FileDigest::of(&bytes))
}

pub(crate) fn empty_manifest(base_seed: u64, trials_per_cell: usize) -> DatasetManifest {
    DatasetManifest {
        format_version: FORMAT_VERSION,
        base_seed,
        trials_per_cell,
        trials: Vec::new(),
        splits: None,
    }
}
