//! RIFF WAV, PCM 16-bit mono.

use std::io::Cursor;
use std::path::Path;

use super::Waveform;
use crate::{Error, Result};

const FULL_SCALE: f64 = 32767.0;

fn wav_error(e: hound::Error) -> Error {
    Error::malformed("wav", e.to_string())
}

pub fn encode_wav(w: &Waveform) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut out = Cursor::new(Vec::with_capacity(44 + 2 * w.len()));
    {
        let mut writer = hound::WavWriter::new(&mut out, spec).map_err(wav_error)?;
        for &x in w.samples() {
            writer
                .write_sample((x.clamp(-1.0, 1.0) * FULL_SCALE).round() as i16)
                .map_err(wav_error)?;
        }
        writer.finalize().map_err(wav_error)?;
    }
    Ok(out.into_inner())
}

/// Decodes PCM16 mono; anything else is rejected.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(wav_error)?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(Error::malformed(
            "wav",
            format!(
                "expected 16-bit integer mono, found {} channel(s) of {}-bit {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| (f64::from(v) / FULL_SCALE).max(-1.0)))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(wav_error)?;
    Waveform::new(samples, spec.sample_rate)
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    std::fs::write(path, encode_wav(w)?).map_err(|e| Error::io(path, e))
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}
