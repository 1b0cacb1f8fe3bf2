//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use graspsense::models::LabeledMfcc;
use graspsense::Material;

pub const SR: f64 = 16_000.0;
pub const FRAME: usize = 400;
pub const HOP: usize = 160;
pub const NFFT: usize = 512;
pub const NMELS: usize = 40;
pub const NCOEF: usize = 13;
pub const FMIN: f64 = 20.0;
pub const FMAX: f64 = 7600.0;
pub const FLOOR: f64 = 1e-10;

/// Textbook MFCC: direct DFT per frame, triangle weights evaluated from their
/// definition at each bin, natural log, orthonormal DCT-II by its sum.
pub struct NaiveMfcc {
    cos: Vec<f64>,
    sin: Vec<f64>,
    fbank: Vec<Vec<f64>>,
}

impl Default for NaiveMfcc {
    fn default() -> Self {
        Self::new()
    }
}

impl NaiveMfcc {
    pub fn new() -> Self {
        let cos = (0..NFFT)
            .map(|i| (2.0 * PI * i as f64 / NFFT as f64).cos())
            .collect();
        let sin = (0..NFFT)
            .map(|i| (2.0 * PI * i as f64 / NFFT as f64).sin())
            .collect();
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let (lo, hi) = (mel(FMIN), mel(FMAX));
        let pts: Vec<f64> = (0..NMELS + 2)
            .map(|i| inv(lo + (hi - lo) * i as f64 / (NMELS + 1) as f64))
            .collect();
        let fbank = (0..NMELS)
            .map(|m| {
                (0..=NFFT / 2)
                    .map(|k| {
                        let f = k as f64 * SR / NFFT as f64;
                        let up = (f - pts[m]) / (pts[m + 1] - pts[m]);
                        let down = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
                        up.min(down).max(0.0)
                    })
                    .collect()
            })
            .collect();
        NaiveMfcc { cos, sin, fbank }
    }

    pub fn compute(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_frames = if x.len() < FRAME {
            0
        } else {
            1 + (x.len() - FRAME) / HOP
        };
        (0..n_frames)
            .map(|f| {
                let frame: Vec<f64> = (0..FRAME)
                    .map(|n| {
                        x[f * HOP + n] * (0.5 - 0.5 * (2.0 * PI * n as f64 / FRAME as f64).cos())
                    })
                    .collect();
                let power: Vec<f64> = (0..=NFFT / 2)
                    .map(|k| {
                        let (mut re, mut im) = (0.0, 0.0);
                        for (n, v) in frame.iter().enumerate() {
                            let idx = (k * n) % NFFT;
                            re += v * self.cos[idx];
                            im -= v * self.sin[idx];
                        }
                        re * re + im * im
                    })
                    .collect();
                let logmel: Vec<f64> = self
                    .fbank
                    .iter()
                    .map(|w| (w.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>() + FLOOR).ln())
                    .collect();
                (0..NCOEF)
                    .map(|k| {
                        let s: f64 = logmel
                            .iter()
                            .enumerate()
                            .map(|(j, v)| {
                                v * (PI * k as f64 * (j as f64 + 0.5) / NMELS as f64).cos()
                            })
                            .sum();
                        s * if k == 0 {
                            (1.0 / NMELS as f64).sqrt()
                        } else {
                            (2.0 / NMELS as f64).sqrt()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Accuracy of assigning each test segment to the class whose mean
/// per-segment MFCC mean vector is nearest in Euclidean distance.
pub fn nearest_centroid_accuracy(train: &[LabeledMfcc], test: &[LabeledMfcc]) -> f64 {
    let dim = train[0].mfcc.n_coeffs();
    let mut sums = vec![vec![0.0; dim]; Material::COUNT];
    let mut counts = vec![0usize; Material::COUNT];
    for d in train {
        let m = d.mfcc.mean();
        for (s, v) in sums[d.label.index()].iter_mut().zip(&m) {
            *s += v;
        }
        counts[d.label.index()] += 1;
    }
    let centroids: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect())
        .collect();
    let correct = test
        .iter()
        .filter(|d| {
            let m = d.mfcc.mean();
            let best = (0..Material::COUNT)
                .min_by(|&a, &b| {
                    let da: f64 = centroids[a]
                        .iter()
                        .zip(&m)
                        .map(|(c, x)| (c - x).powi(2))
                        .sum();
                    let db: f64 = centroids[b]
                        .iter()
                        .zip(&m)
                        .map(|(c, x)| (c - x).powi(2))
                        .sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            best == d.label.index()
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Mutual information between class and classifier outcome in bits,
/// `Σ_i Σ_o p_i C_io log2(C_io / P(o))`, summed over every (class, outcome)
/// pair.
pub fn mutual_information_bits(p: &[f64; 5], c: &[[f64; 5]; 5]) -> f64 {
    let p_o: Vec<f64> = (0..5)
        .map(|o| (0..5).map(|i| p[i] * c[i][o]).sum())
        .collect();
    let mut total = 0.0;
    for i in 0..5 {
        for o in 0..5 {
            let joint = p[i] * c[i][o];
            if joint > 0.0 {
                total += joint * (c[i][o] / p_o[o]).log2();
            }
        }
    }
    total
}

/// Central finite-difference check of `grad` for `f` at `params`, over the
/// given parameter indices. Returns the worst relative error, with the
/// denominator floored so near-zero gradients are compared absolutely.
pub fn worst_relative_error(
    params: &[f64],
    grad: &[f64],
    indices: impl IntoIterator<Item = usize>,
    eps: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for i in indices {
        let orig = p[i];
        p[i] = orig + eps;
        let up = f(&p);
        p[i] = orig - eps;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let denom = numeric.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max((numeric - grad[i]).abs() / denom);
    }
    worst
}
