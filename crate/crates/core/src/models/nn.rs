//! Small numerical building blocks shared by both models.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy on a logit.
pub(crate) fn bce_with_logit(logit: f64, target: f64) -> f64 {
    softplus(logit) - target * logit
}

/// Per-feature affine standardization `(x − mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations below this are treated as this.
const MIN_STD: f64 = 1e-6;

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "row of {} features, expected {dim}",
                    row.len()
                )));
            }
            n += 1;
            for ((s, q), x) in sum.iter_mut().zip(sq.iter_mut()).zip(row) {
                *s += x;
                *q += x * x;
            }
        }
        if n == 0 {
            return Err(Error::EmptyDataset("no rows to standardize".into()));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / nf - m * m).max(0.0).sqrt().max(MIN_STD))
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, i: usize, x: f64) -> f64 {
        (x - self.mean[i]) / self.std[i]
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (i, (o, x)) in out.iter_mut().zip(row).enumerate() {
            *o = self.apply(i, *x);
        }
    }

    pub(crate) fn flat(&self) -> Vec<f64> {
        self.mean.iter().chain(&self.std).copied().collect()
    }

    pub(crate) fn from_flat(values: &[f64]) -> Self {
        let d = values.len() / 2;
        Standardizer {
            mean: values[..d].to_vec(),
            std: values[d..].to_vec(),
        }
    }

    pub(crate) fn round_to_f32(&mut self) {
        round_to_f32(&mut self.mean);
        round_to_f32(&mut self.std);
    }
}

/// Rounds every value to the nearest f32 so a saved model reloads bit-exactly.
pub(crate) fn round_to_f32(values: &mut [f64]) {
    values.iter_mut().for_each(|v| *v = f64::from(*v as f32));
}

/// SGD with classical momentum: `v ← μ·v − lr·g; θ ← θ + v`.
#[derive(Clone, Debug)]
pub(crate) struct Momentum {
    velocity: Vec<f64>,
    lr: f64,
    momentum: f64,
}

impl Momentum {
    pub fn new(n: usize, lr: f64, momentum: f64) -> Self {
        Momentum {
            velocity: vec![0.0; n],
            lr,
            momentum,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        for ((p, v), g) in params.iter_mut().zip(self.velocity.iter_mut()).zip(grads) {
            *v = self.momentum * *v - self.lr * g;
            *p += *v;
        }
    }
}

/// Scales `grads` down so their L2 norm is at most `max_norm`.
pub(crate) fn clip_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::invalid("epochs and batch must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("need lr > 0 and momentum in [0, 1)"));
        }
        Ok(())
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            epochs: 30,
            lr: 0.01,
            momentum: 0.9,
            batch: 32,
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_and_survives_large_logits() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn bce_matches_direct_formula() {
        for (l, y) in [(0.3, 1.0), (-2.0, 0.0), (5.0, 0.0), (-40.0, 1.0)] {
            let p: f64 = sigmoid(l);
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(l, y) - direct).abs() < 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn standardizer_centres_and_scales() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(2, rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.std[1], MIN_STD);
        assert_eq!(s.apply(0, 3.0), 1.0);
    }

    #[test]
    fn clip_bounds_the_norm() {
        let mut g = vec![3.0, 4.0];
        clip_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }
}
