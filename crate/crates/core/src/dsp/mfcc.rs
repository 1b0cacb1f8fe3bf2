//! MFCC extraction: Hann window, power spectrum, HTK mel filterbank, log,
//! orthonormal DCT-II.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AudioSegment;
use crate::{Error, Result, SAMPLE_RATE};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    /// 25 ms frames, 10 ms hop, 512-point FFT, 40 mels, 13 coefficients.
    fn default() -> Self {
        MfccConfig {
            sample_rate: SAMPLE_RATE,
            frame_len: 400,
            hop: 160,
            n_fft: 512,
            n_mels: 40,
            n_coeffs: 13,
            fmin: 20.0,
            fmax: 7600.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("mfcc config: {msg}")));
        if self.sample_rate == 0
            || self.frame_len == 0
            || self.hop == 0
            || self.n_mels == 0
            || self.n_coeffs == 0
        {
            return bad("sizes must be positive");
        }
        if self.n_coeffs > self.n_mels {
            return bad("n_coeffs must not exceed n_mels");
        }
        if self.frame_len > self.n_fft {
            return bad("frame_len must not exceed n_fft");
        }
        if !(self.fmin >= 0.0
            && self.fmin < self.fmax
            && self.fmax <= f64::from(self.sample_rate) / 2.0)
        {
            return bad("need 0 <= fmin < fmax <= sample_rate / 2");
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad("log_floor must be positive");
        }
        Ok(())
    }

    /// 1 + floor((len − frame_len) / hop), or 0 when the signal is too short.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            1 + (len - self.frame_len) / self.hop
        }
    }

    /// Edges of the mel triangles in Hz (n_mels + 2 points).
    pub fn mel_edges_hz(&self) -> Vec<f64> {
        let lo = hz_to_mel(self.fmin);
        let hi = hz_to_mel(self.fmax);
        (0..self.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (self.n_mels + 1) as f64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfccMatrix {
    /// Time-ordered frames of `n_coeffs` coefficients.
    pub frames: Vec<Vec<f64>>,
    pub config: MfccConfig,
}

impl MfccMatrix {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_coeffs(&self) -> usize {
        self.config.n_coeffs
    }

    /// Per-coefficient mean over frames.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_coeffs()];
        for f in &self.frames {
            for (a, x) in m.iter_mut().zip(f) {
                *a += x;
            }
        }
        let n = self.frames.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Precomputed window, filterbank, DCT and FFT plan for one config.
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    /// Per mel band: first FFT bin and its weights.
    filters: Vec<(usize, Vec<f64>)>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        config.validate()?;
        let window = (0..config.frame_len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / config.frame_len as f64).cos())
            .collect();

        let edges = config.mel_edges_hz();
        let n_bins = config.n_fft / 2 + 1;
        let bin_hz = f64::from(config.sample_rate) / config.n_fft as f64;
        let filters = (0..config.n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match (weights.first(), weights.last()) {
                    (Some(&(first, _)), Some(&(last, _))) => {
                        let mut dense = vec![0.0; last - first + 1];
                        for (k, w) in weights {
                            dense[k - first] = w;
                        }
                        (first, dense)
                    }
                    _ => (0, Vec::new()),
                }
            })
            .collect();

        let n = config.n_mels as f64;
        let dct = (0..config.n_coeffs)
            .map(|k| {
                let scale = if k == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                (0..config.n_mels)
                    .map(|j| scale * (PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n)).cos())
                    .collect()
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(MfccExtractor {
            config,
            window,
            filters,
            dct,
            fft,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn compute(&self, samples: &[f64]) -> Result<MfccMatrix> {
        let cfg = &self.config;
        if samples.len() < cfg.frame_len {
            return Err(Error::invalid(format!(
                "signal of {} samples is shorter than one frame ({})",
                samples.len(),
                cfg.frame_len
            )));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mfcc input"));
        }
        let n_frames = cfg.frame_count(samples.len());
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
        let mut power = vec![0.0; cfg.n_fft / 2 + 1];
        let mut log_mel = vec![0.0; cfg.n_mels];
        let mut frames = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let start = f * cfg.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = if i < cfg.frame_len {
                    Complex::new(samples[start + i] * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (out, (first, weights)) in log_mel.iter_mut().zip(&self.filters) {
                let e: f64 = weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum();
                *out = (e + cfg.log_floor).ln();
            }
            frames.push(
                self.dct
                    .iter()
                    .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
                    .collect(),
            );
        }
        Ok(MfccMatrix {
            frames,
            config: cfg.clone(),
        })
    }

    pub fn segment(&self, seg: &AudioSegment) -> Result<MfccMatrix> {
        if seg.sample_rate != self.config.sample_rate {
            return Err(Error::ShapeMismatch(format!(
                "segment at {} Hz, extractor configured for {} Hz",
                seg.sample_rate, self.config.sample_rate
            )));
        }
        self.compute(&seg.samples)
    }
}

pub fn mfcc(seg: &AudioSegment, cfg: &MfccConfig) -> Result<MfccMatrix> {
    MfccExtractor::new(cfg.clone())?.segment(seg)
}
