//! Versioned flat binary model container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "GSPMODEL"
//! 8       4     format version (u32 LE)
//! 12      4     model kind (u32 LE: 1 classifier, 2 predictor)
//! 16      4     descriptor length D (u32 LE)
//! 20      D     architecture descriptor, UTF-8 JSON
//! 20+D    4     parameter count P (u32 LE)
//! 24+D    4·P   parameters, f32 LE
//! 24+D+4P 4     CRC32 of every preceding byte (u32 LE)
//! ```

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GSPMODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Classifier = 1,
    Predictor = 2,
}

impl ModelKind {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            1 => Some(ModelKind::Classifier),
            2 => Some(ModelKind::Predictor),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBlob {
    pub kind: ModelKind,
    pub descriptor: String,
    pub params: Vec<f32>,
}

pub fn encode_model(blob: &ModelBlob) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + blob.descriptor.len() + 4 * blob.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(blob.kind as u32).to_le_bytes());
    out.extend_from_slice(&(blob.descriptor.len() as u32).to_le_bytes());
    out.extend_from_slice(blob.descriptor.as_bytes());
    out.extend_from_slice(&(blob.params.len() as u32).to_le_bytes());
    for p in &blob.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated {
                file: "model".into(),
                detail: format!("ends inside {what}"),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelBlob> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != MAGIC {
        return Err(Error::malformed("model", "bad magic"));
    }
    let version = c.u32("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            file: "model".into(),
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let kind_raw = c.u32("kind")?;
    let kind = ModelKind::from_u32(kind_raw)
        .ok_or_else(|| Error::malformed("model", format!("unknown kind {kind_raw}")))?;
    let d = c.u32("descriptor length")? as usize;
    let descriptor = std::str::from_utf8(c.take(d, "descriptor")?)
        .map_err(|_| Error::malformed("model", "descriptor is not UTF-8"))?
        .to_string();
    let n = c.u32("parameter count")? as usize;
    let raw = c.take(
        n.checked_mul(4)
            .ok_or_else(|| Error::malformed("model", "parameter count overflows"))?,
        "parameters",
    )?;
    let body_end = c.pos;
    let stored = c.u32("checksum")?;
    if c.pos != bytes.len() {
        return Err(Error::malformed("model", "trailing bytes after checksum"));
    }
    let found = crc32fast::hash(&bytes[..body_end]);
    if stored != found {
        return Err(Error::Checksum {
            file: "model".into(),
            expected: stored,
            found,
        });
    }
    let params: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("model parameters"));
    }
    Ok(ModelBlob {
        kind,
        descriptor,
        params,
    })
}
