//! Per-trial directory format.
//!
//! ```text
//! <trial>/audio.wav    PCM16 mono, 16 kHz
//! <trial>/tactile.csv  t, c000..c255 (row-major), a00..a15 (rad), q00..q15 (Nm)
//! <trial>/truth.csv    step, t, slip, max_force, row, col, dropped, slip_disp
//! <trial>/meta.json    identity, motion spec, motion window, per-file CRC32 and size
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a trial back
//! reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{StepTruth, TrialRecord};
use crate::controller::motion::MotionSpec;
use crate::dsp::{decode_wav, encode_wav};
use crate::tactile::{TactileFrame, TactileGrid};
use crate::{Error, Material, Result, GRID_CELLS, GRID_COLS, GRID_ROWS, NUM_JOINTS, SAMPLE_RATE};

pub const FORMAT_VERSION: u32 = 1;
pub const AUDIO_FILE: &str = "audio.wav";
pub const TACTILE_FILE: &str = "tactile.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const META_FILE: &str = "meta.json";
const TRUTH_HEADER: [&str; 8] = [
    "step",
    "t",
    "slip",
    "max_force",
    "row",
    "col",
    "dropped",
    "slip_disp",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub crc32: u32,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(bytes: &[u8]) -> Self {
        FileDigest {
            crc32: crc32fast::hash(bytes),
            bytes: bytes.len() as u64,
        }
    }

    /// Truncation is reported before a checksum mismatch.
    pub fn check(&self, file: &Path, bytes: &[u8]) -> Result<()> {
        let found = bytes.len() as u64;
        if found < self.bytes {
            return Err(Error::Truncated {
                file: file.to_path_buf(),
                detail: format!("{found} of {} bytes", self.bytes),
            });
        }
        let crc = crc32fast::hash(bytes);
        if crc != self.crc32 || found != self.bytes {
            return Err(Error::Checksum {
                file: file.to_path_buf(),
                expected: self.crc32,
                found: crc,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialMeta {
    pub format_version: u32,
    pub trial_id: String,
    pub material: Material,
    pub motion: MotionSpec,
    pub seed: u64,
    pub grip_torque: f64,
    pub motion_start_s: f64,
    pub motion_end_s: f64,
    pub steps: usize,
    pub sample_rate: u32,
    pub files: BTreeMap<String, FileDigest>,
}

/// Reads `format_version` before anything else so older or newer files are
/// rejected with a version error rather than a schema error.
pub(crate) fn check_version(file: &Path, bytes: &[u8]) -> Result<serde_json::Value> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::malformed(file.display().to_string(), e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::malformed(file.display().to_string(), "missing format_version"))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::Version {
            file: file.to_path_buf(),
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    Ok(value)
}

pub fn parse_meta(bytes: &[u8]) -> Result<TrialMeta> {
    let file = Path::new(META_FILE);
    let value = check_version(file, bytes)?;
    let meta: TrialMeta =
        serde_json::from_value(value).map_err(|e| Error::malformed(META_FILE, e.to_string()))?;
    if meta.sample_rate != SAMPLE_RATE {
        return Err(Error::malformed(
            META_FILE,
            format!("sample rate {} (expected {SAMPLE_RATE})", meta.sample_rate),
        ));
    }
    for name in [AUDIO_FILE, TACTILE_FILE, TRUTH_FILE] {
        if !meta.files.contains_key(name) {
            return Err(Error::malformed(META_FILE, format!("no digest for {name}")));
        }
    }
    Ok(meta)
}

fn tactile_header() -> String {
    let mut h = String::from("t");
    for i in 0..GRID_CELLS {
        write!(h, ",c{i:03}").unwrap();
    }
    for j in 0..NUM_JOINTS {
        write!(h, ",a{j:02}").unwrap();
    }
    for j in 0..NUM_JOINTS {
        write!(h, ",q{j:02}").unwrap();
    }
    h
}

pub fn encode_tactile_csv(frames: &[TactileFrame]) -> String {
    let mut out = tactile_header();
    out.push('\n');
    for f in frames {
        write!(out, "{}", f.t).unwrap();
        for x in f
            .grid
            .cells()
            .iter()
            .chain(&f.joint_angles)
            .chain(&f.joint_torques)
        {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_field(file: &str, row: usize, field: &str) -> Result<f64> {
    let x: f64 = field
        .parse()
        .map_err(|_| Error::malformed(file, format!("row {row}: {field:?} is not a number")))?;
    if !x.is_finite() {
        return Err(Error::malformed(
            file,
            format!("row {row}: non-finite value"),
        ));
    }
    Ok(x)
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes)
}

fn check_header(file: &str, reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader
        .headers()
        .map_err(|e| Error::malformed(file, e.to_string()))?;
    if header.len() != expected.len() || header.iter().zip(expected).any(|(a, b)| a != *b) {
        return Err(Error::malformed(file, "unexpected header"));
    }
    Ok(())
}

pub fn parse_tactile_csv(bytes: &[u8]) -> Result<Vec<TactileFrame>> {
    let header = tactile_header();
    let expected: Vec<&str> = header.split(',').collect();
    let width = expected.len();
    let mut reader = csv_reader(bytes);
    check_header(TACTILE_FILE, &mut reader, &expected)?;
    let mut frames = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(TACTILE_FILE, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::Truncated {
                file: PathBuf::from(TACTILE_FILE),
                detail: format!("row {row} has {} of {width} fields", rec.len()),
            });
        }
        let values = rec
            .iter()
            .map(|f| parse_field(TACTILE_FILE, row, f))
            .collect::<Result<Vec<f64>>>()?;
        let grid = TactileGrid::from_cells(&values[1..1 + GRID_CELLS])?;
        let mut joint_angles = [0.0; NUM_JOINTS];
        joint_angles.copy_from_slice(&values[1 + GRID_CELLS..1 + GRID_CELLS + NUM_JOINTS]);
        let mut joint_torques = [0.0; NUM_JOINTS];
        joint_torques.copy_from_slice(&values[1 + GRID_CELLS + NUM_JOINTS..]);
        frames.push(TactileFrame {
            t: values[0],
            grid,
            joint_angles,
            joint_torques,
        });
    }
    Ok(frames)
}

pub fn encode_truth_csv(truth: &[StepTruth], frames: &[TactileFrame]) -> String {
    let mut out = TRUTH_HEADER.join(",");
    out.push('\n');
    for (i, (s, f)) in truth.iter().zip(frames).enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            f.t,
            u8::from(s.slip),
            s.max_force,
            s.max_cell.0,
            s.max_cell.1,
            u8::from(s.dropped),
            s.slip_displacement
        )
        .unwrap();
    }
    out
}

fn parse_flag(row: usize, field: &str) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::malformed(
            TRUTH_FILE,
            format!("row {row}: flag {field:?} is not 0 or 1"),
        )),
    }
}

fn parse_index(row: usize, field: &str, bound: usize) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(v) if v < bound => Ok(v),
        _ => Err(Error::malformed(
            TRUTH_FILE,
            format!("row {row}: bad cell index {field:?}"),
        )),
    }
}

/// Truth rows; the `t` column is returned alongside for cross-checking.
pub fn parse_truth_csv(bytes: &[u8]) -> Result<Vec<(f64, StepTruth)>> {
    let mut reader = csv_reader(bytes);
    check_header(TRUTH_FILE, &mut reader, &TRUTH_HEADER)?;
    let mut rows = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(TRUTH_FILE, e.to_string()))?;
        if rec.len() != TRUTH_HEADER.len() {
            return Err(Error::Truncated {
                file: PathBuf::from(TRUTH_FILE),
                detail: format!(
                    "row {row} has {} of {} fields",
                    rec.len(),
                    TRUTH_HEADER.len()
                ),
            });
        }
        if rec[0].parse::<usize>().ok() != Some(row) {
            return Err(Error::malformed(
                TRUTH_FILE,
                format!("row {row}: step column reads {:?}", &rec[0]),
            ));
        }
        let max_force = parse_field(TRUTH_FILE, row, &rec[3])?;
        let slip_displacement = parse_field(TRUTH_FILE, row, &rec[7])?;
        if max_force < 0.0 || slip_displacement < 0.0 {
            return Err(Error::malformed(
                TRUTH_FILE,
                format!("row {row}: negative force or slip"),
            ));
        }
        rows.push((
            parse_field(TRUTH_FILE, row, &rec[1])?,
            StepTruth {
                slip: parse_flag(row, &rec[2])?,
                max_force,
                max_cell: (
                    parse_index(row, &rec[4], GRID_ROWS)?,
                    parse_index(row, &rec[5], GRID_COLS)?,
                ),
                dropped: parse_flag(row, &rec[6])?,
                slip_displacement,
            },
        ));
    }
    Ok(rows)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes the trial into `dir` (created if needed) and returns its metadata.
pub fn write_trial(dir: &Path, record: &TrialRecord) -> Result<TrialMeta> {
    record.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let audio = encode_wav(&record.audio)?;
    let tactile = encode_tactile_csv(&record.tactile);
    let truth = encode_truth_csv(&record.truth, &record.tactile);
    let mut files = BTreeMap::new();
    for (name, bytes) in [
        (AUDIO_FILE, audio.as_slice()),
        (TACTILE_FILE, tactile.as_bytes()),
        (TRUTH_FILE, truth.as_bytes()),
    ] {
        write_file(&dir.join(name), bytes)?;
        files.insert(name.to_string(), FileDigest::of(bytes));
    }
    let meta = TrialMeta {
        format_version: FORMAT_VERSION,
        trial_id: record.trial_id.clone(),
        material: record.material,
        motion: record.motion,
        seed: record.seed,
        grip_torque: record.grip_torque,
        motion_start_s: record.motion_start_s,
        motion_end_s: record.motion_end_s,
        steps: record.steps(),
        sample_rate: record.audio.sample_rate(),
        files,
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::malformed(META_FILE, e.to_string()))?;
    write_file(&dir.join(META_FILE), json.as_bytes())?;
    Ok(meta)
}

/// Reads a trial, verifying the version, every file's size and CRC32 and the
/// cross-file shapes before building the record.
pub fn read_trial(dir: &Path) -> Result<TrialRecord> {
    let meta_path = dir.join(META_FILE);
    let meta = parse_meta(&read_file(&meta_path)?).map_err(|e| match e {
        Error::Version {
            found, expected, ..
        } => Error::Version {
            file: meta_path.clone(),
            found,
            expected,
        },
        other => other,
    })?;
    let mut payloads = BTreeMap::new();
    for name in [AUDIO_FILE, TACTILE_FILE, TRUTH_FILE] {
        let path = dir.join(name);
        let bytes = read_file(&path)?;
        meta.files[name].check(&path, &bytes)?;
        payloads.insert(name, bytes);
    }
    let audio = decode_wav(&payloads[AUDIO_FILE])?;
    let tactile = parse_tactile_csv(&payloads[TACTILE_FILE])?;
    let truth_rows = parse_truth_csv(&payloads[TRUTH_FILE])?;
    for (name, n) in [
        (TACTILE_FILE, tactile.len()),
        (TRUTH_FILE, truth_rows.len()),
    ] {
        if n != meta.steps {
            return Err(Error::Truncated {
                file: dir.join(name),
                detail: format!("{n} of {} steps", meta.steps),
            });
        }
    }
    if tactile
        .iter()
        .zip(&truth_rows)
        .any(|(f, (t, _))| f.t.to_bits() != t.to_bits())
    {
        return Err(Error::malformed(
            TRUTH_FILE,
            "timestamps disagree with tactile.csv",
        ));
    }
    let record = TrialRecord {
        trial_id: meta.trial_id,
        material: meta.material,
        motion: meta.motion,
        seed: meta.seed,
        grip_torque: meta.grip_torque,
        motion_start_s: meta.motion_start_s,
        motion_end_s: meta.motion_end_s,
        audio,
        tactile,
        truth: truth_rows.into_iter().map(|(_, s)| s).collect(),
    };
    record.validate()?;
    Ok(record)
}
