//! MFCC material classifier: two 1-D convolutions over time with the MFCC
//! coefficients as input channels, each followed by ReLU and max-pool 2, then
//! global average pooling, one affine layer and softmax.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codec::{decode_model, encode_model, ModelBlob, ModelKind};
use super::metrics::ClassifierMetrics;
use super::nn::{round_to_f32, softmax, Momentum, SgdConfig, Standardizer};
use crate::dsp::{MfccConfig, MfccMatrix};
use crate::{Error, Material, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierArch {
    pub n_coeffs: usize,
    pub n_frames: usize,
    pub channels: [usize; 2],
    pub kernel: usize,
    pub n_classes: usize,
}

impl ClassifierArch {
    /// 13 coefficients × 98 frames → 16, 32 channels, kernel 3 → 5 classes.
    pub fn standard(mfcc: &MfccConfig) -> Self {
        ClassifierArch {
            n_coeffs: mfcc.n_coeffs,
            n_frames: mfcc.frame_count(mfcc.sample_rate as usize),
            channels: [16, 32],
            kernel: 3,
            n_classes: Material::COUNT,
        }
    }

    fn lens(&self) -> [usize; 4] {
        let l1 = self.n_frames + 1 - self.kernel;
        let p1 = l1 / 2;
        let l2 = (p1 + 1).saturating_sub(self.kernel);
        [l1, p1, l2, l2 / 2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_coeffs == 0
            || self.channels.contains(&0)
            || self.kernel == 0
            || self.n_classes < 2
        {
            return Err(Error::invalid(
                "classifier sizes must be positive (and at least 2 classes)",
            ));
        }
        if self.n_frames < self.kernel || self.lens()[3] == 0 {
            return Err(Error::invalid(format!(
                "{} frames are too few for this architecture",
                self.n_frames
            )));
        }
        Ok(())
    }

    fn offsets(&self) -> Offsets {
        let [c1, c2] = self.channels;
        let w1 = 0;
        let b1 = w1 + c1 * self.n_coeffs * self.kernel;
        let w2 = b1 + c1;
        let b2 = w2 + c2 * c1 * self.kernel;
        let w3 = b2 + c2;
        let b3 = w3 + self.n_classes * c2;
        Offsets {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            total: b3 + self.n_classes,
        }
    }

    pub fn n_params(&self) -> usize {
        self.offsets().total
    }

    pub fn input_len(&self) -> usize {
        self.n_coeffs * self.n_frames
    }
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Descriptor {
    arch: ClassifierArch,
    mfcc: MfccConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialClassifier {
    arch: ClassifierArch,
    mfcc: MfccConfig,
    params: Vec<f64>,
    /// Per-coefficient input standardization.
    norm: Standardizer,
}

/// Activations kept for the backward pass.
struct Cache {
    x: Vec<f64>,
    p1: Vec<f64>,
    arg1: Vec<usize>,
    p2: Vec<f64>,
    arg2: Vec<usize>,
    g: Vec<f64>,
    probs: Vec<f64>,
}

/// `out[o][t] = b[o] + Σ_i Σ_k w[o][i][k]·x[i][t+k]`.
fn conv1d(
    x: &[f64],
    cin: usize,
    len: usize,
    w: &[f64],
    b: &[f64],
    cout: usize,
    k: usize,
) -> Vec<f64> {
    let lout = len + 1 - k;
    let mut out = vec![0.0; cout * lout];
    for o in 0..cout {
        let row = &mut out[o * lout..(o + 1) * lout];
        row.iter_mut().for_each(|v| *v = b[o]);
        for i in 0..cin {
            let xi = &x[i * len..(i + 1) * len];
            for kk in 0..k {
                let wv = w[(o * cin + i) * k + kk];
                for (r, xv) in row.iter_mut().zip(&xi[kk..kk + lout]) {
                    *r += wv * xv;
                }
            }
        }
    }
    out
}

/// ReLU then non-overlapping max-pool 2; returns pooled values and the
/// index (into `z`) each came from.
fn relu_pool(z: &[f64], ch: usize, len: usize) -> (Vec<f64>, Vec<usize>) {
    let plen = len / 2;
    let mut p = vec![0.0; ch * plen];
    let mut arg = vec![0; ch * plen];
    for c in 0..ch {
        for t in 0..plen {
            let a = c * len + 2 * t;
            let (i, v) = if z[a + 1] > z[a] {
                (a + 1, z[a + 1])
            } else {
                (a, z[a])
            };
            p[c * plen + t] = v.max(0.0);
            arg[c * plen + t] = i;
        }
    }
    (p, arg)
}

impl MaterialClassifier {
    /// He-initialized weights, zero biases.
    pub fn new(arch: ClassifierArch, mfcc: MfccConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let off = arch.offsets();
        let mut params = vec![0.0; off.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let n = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
            for p in &mut params[range] {
                *p = f64::from(n.sample(&mut rng) as f32);
            }
        };
        let [c1, c2] = arch.channels;
        fill(off.w1..off.b1, arch.n_coeffs * arch.kernel);
        fill(off.w2..off.b2, c1 * arch.kernel);
        fill(off.w3..off.b3, c2);
        Ok(MaterialClassifier {
            arch,
            mfcc,
            params,
            norm: Standardizer::identity(arch.n_coeffs),
        })
    }

    pub fn arch(&self) -> &ClassifierArch {
        &self.arch
    }

    pub fn mfcc_config(&self) -> &MfccConfig {
        &self.mfcc
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.arch.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters, expected {}",
                params.len(),
                self.arch.n_params()
            )));
        }
        self.params = params;
        Ok(())
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.norm
    }

    /// Standardized, coefficient-major input `x[c][t]`.
    pub fn prepare(&self, m: &MfccMatrix) -> Result<Vec<f64>> {
        if m.config != self.mfcc {
            return Err(Error::ShapeMismatch(
                "MFCC config differs from the training config".into(),
            ));
        }
        if m.n_frames() != self.arch.n_frames
            || m.frames.iter().any(|f| f.len() != self.arch.n_coeffs)
        {
            return Err(Error::ShapeMismatch(format!(
                "MFCC of {} frames, classifier expects {}×{}",
                m.n_frames(),
                self.arch.n_frames,
                self.arch.n_coeffs
            )));
        }
        let (nc, nf) = (self.arch.n_coeffs, self.arch.n_frames);
        let mut x = vec![0.0; nc * nf];
        for (t, frame) in m.frames.iter().enumerate() {
            for (c, v) in frame.iter().enumerate() {
                x[c * nf + t] = self.norm.apply(c, *v);
            }
        }
        Ok(x)
    }

    fn forward(&self, x: &[f64]) -> Cache {
        let a = &self.arch;
        let off = a.offsets();
        let [c1, c2] = a.channels;
        let [l1, p1, l2, _] = a.lens();
        let p = &self.params;
        let z1 = conv1d(
            x,
            a.n_coeffs,
            a.n_frames,
            &p[off.w1..off.b1],
            &p[off.b1..off.w2],
            c1,
            a.kernel,
        );
        let (pool1, arg1) = relu_pool(&z1, c1, l1);
        let z2 = conv1d(
            &pool1,
            c1,
            p1,
            &p[off.w2..off.b2],
            &p[off.b2..off.w3],
            c2,
            a.kernel,
        );
        let (pool2, arg2) = relu_pool(&z2, c2, l2);
        let plen = l2 / 2;
        let g: Vec<f64> = (0..c2)
            .map(|c| pool2[c * plen..(c + 1) * plen].iter().sum::<f64>() / plen as f64)
            .collect();
        let logits: Vec<f64> = (0..a.n_classes)
            .map(|o| p[off.b3 + o] + (0..c2).map(|c| p[off.w3 + o * c2 + c] * g[c]).sum::<f64>())
            .collect();
        Cache {
            x: x.to_vec(),
            p1: pool1,
            arg1,
            p2: pool2,
            arg2,
            g,
            probs: softmax(&logits),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "input of {} values, expected {}",
                x.len(),
                self.arch.input_len()
            )));
        }
        Ok(())
    }

    /// Class probabilities for a prepared input.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).probs)
    }

    pub fn classify(&self, m: &MfccMatrix) -> Result<Vec<f64>> {
        let x = self.prepare(m)?;
        Ok(self.forward(&x).probs)
    }

    /// Cross-entropy of `label` and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        if label >= self.arch.n_classes {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        let cache = self.forward(x);
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&cache, label, &mut grad);
        Ok((-cache.probs[label].max(f64::MIN_POSITIVE).ln(), grad))
    }

    fn backward(&self, cache: &Cache, label: usize, grad: &mut [f64]) {
        let a = &self.arch;
        let off = a.offsets();
        let [c1, c2] = a.channels;
        let [l1, p1len, l2, p2len] = a.lens();
        let k = a.kernel;
        let p = &self.params;

        let mut dlogit = cache.probs.clone();
        dlogit[label] -= 1.0;
        let mut dg = vec![0.0; c2];
        for (o, dl) in dlogit.iter().enumerate() {
            grad[off.b3 + o] += dl;
            for c in 0..c2 {
                grad[off.w3 + o * c2 + c] += dl * cache.g[c];
                dg[c] += p[off.w3 + o * c2 + c] * dl;
            }
        }

        // through GAP, pool and ReLU of layer 2
        let mut dz2 = vec![0.0; c2 * l2];
        for c in 0..c2 {
            for t in 0..p2len {
                let i = c * p2len + t;
                if cache.p2[i] > 0.0 {
                    dz2[cache.arg2[i]] += dg[c] / p2len as f64;
                }
            }
        }
        let mut dp1 = vec![0.0; c1 * p1len];
        for o in 0..c2 {
            let dz = &dz2[o * l2..(o + 1) * l2];
            grad[off.b2 + o] += dz.iter().sum::<f64>();
            for i in 0..c1 {
                let xi = &cache.p1[i * p1len..(i + 1) * p1len];
                for kk in 0..k {
                    let widx = off.w2 + (o * c1 + i) * k + kk;
                    let mut gw = 0.0;
                    let wv = p[widx];
                    let dxi = &mut dp1[i * p1len + kk..i * p1len + kk + l2];
                    for ((d, x), dx) in dz.iter().zip(&xi[kk..kk + l2]).zip(dxi.iter_mut()) {
                        gw += d * x;
                        *dx += wv * d;
                    }
                    grad[widx] += gw;
                }
            }
        }

        let mut dz1 = vec![0.0; c1 * l1];
        for (i, d) in dp1.iter().enumerate() {
            if cache.p1[i] > 0.0 {
                dz1[cache.arg1[i]] += d;
            }
        }
        let (nc, nf) = (a.n_coeffs, a.n_frames);
        for o in 0..c1 {
            let dz = &dz1[o * l1..(o + 1) * l1];
            grad[off.b1 + o] += dz.iter().sum::<f64>();
            for i in 0..nc {
                let xi = &cache.x[i * nf..(i + 1) * nf];
                for kk in 0..k {
                    grad[off.w1 + (o * nc + i) * k + kk] += dz
                        .iter()
                        .zip(&xi[kk..kk + l1])
                        .map(|(d, x)| d * x)
                        .sum::<f64>();
                }
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let descriptor = serde_json::to_string(&Descriptor {
            arch: self.arch,
            mfcc: self.mfcc.clone(),
        })
        .map_err(|e| Error::malformed("classifier descriptor", e.to_string()))?;
        let params = self
            .params
            .iter()
            .chain(&self.norm.flat())
            .map(|&v| v as f32)
            .collect();
        Ok(encode_model(&ModelBlob {
            kind: ModelKind::Classifier,
            descriptor,
            params,
        }))
    }

    /// Parameter block: network weights, then the input mean and std per coefficient.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let blob = decode_model(bytes)?;
        if blob.kind != ModelKind::Classifier {
            return Err(Error::malformed("model", "not a classifier"));
        }
        let d: Descriptor = serde_json::from_str(&blob.descriptor)
            .map_err(|e| Error::malformed("classifier descriptor", e.to_string()))?;
        d.arch.validate()?;
        d.mfcc.validate()?;
        if d.arch.n_coeffs != d.mfcc.n_coeffs {
            return Err(Error::malformed(
                "classifier descriptor",
                "coefficient count disagrees with MFCC config",
            ));
        }
        let n = d.arch.n_params();
        if blob.params.len() != n + 2 * d.arch.n_coeffs {
            return Err(Error::malformed(
                "classifier",
                format!(
                    "{} parameters, architecture needs {}",
                    blob.params.len(),
                    n + 2 * d.arch.n_coeffs
                ),
            ));
        }
        let values: Vec<f64> = blob.params.iter().map(|&v| f64::from(v)).collect();
        let norm = Standardizer::from_flat(&values[n..]);
        if norm.std.iter().any(|s| *s <= 0.0) {
            return Err(Error::malformed(
                "classifier",
                "non-positive standard deviation",
            ));
        }
        Ok(MaterialClassifier {
            arch: d.arch,
            mfcc: d.mfcc,
            params: values[..n].to_vec(),
            norm,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// One MFCC example with its class and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMfcc {
    pub mfcc: MfccMatrix,
    pub label: Material,
    pub source_trial: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierTrainConfig {
    pub sgd: SgdConfig,
    pub channels: [usize; 2],
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        ClassifierTrainConfig {
            sgd: SgdConfig {
                epochs: 30,
                lr: 0.01,
                momentum: 0.9,
                batch: 32,
                seed: 0,
            },
            channels: [16, 32],
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedClassifier {
    pub model: MaterialClassifier,
    /// Metrics on the held-out set passed to training.
    pub metrics: ClassifierMetrics,
    /// Mean training cross-entropy before training and after each epoch.
    pub loss_history: Vec<f64>,
}

fn mean_loss(model: &MaterialClassifier, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        total += -model.probabilities(x)?[y].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / xs.len() as f64)
}

pub fn evaluate_classifier(
    model: &MaterialClassifier,
    data: &[LabeledMfcc],
) -> Result<ClassifierMetrics> {
    let mut truth = Vec::with_capacity(data.len());
    let mut pred = Vec::with_capacity(data.len());
    for d in data {
        let p = model.classify(&d.mfcc)?;
        truth.push(d.label.index());
        pred.push(argmax(&p));
    }
    ClassifierMetrics::from_predictions(&truth, &pred, model.arch.n_classes)
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch SGD with momentum on cross-entropy. The model after the epoch
/// with the best held-out accuracy (earliest on ties) is kept; its weights are
/// rounded to f32 so the saved file reloads bit-exactly.
pub fn train_classifier(
    train: &[LabeledMfcc],
    held_out: &[LabeledMfcc],
    cfg: &ClassifierTrainConfig,
) -> Result<TrainedClassifier> {
    cfg.sgd.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::EmptyDataset("no training segments".into()))?;
    for m in Material::ALL {
        if !train.iter().any(|d| d.label == m) {
            return Err(Error::MissingClass(m.to_string()));
        }
    }
    if held_out.is_empty() {
        return Err(Error::EmptyDataset("no held-out segments".into()));
    }
    let mfcc = first.mfcc.config.clone();
    let arch = ClassifierArch {
        channels: cfg.channels,
        ..ClassifierArch::standard(&mfcc)
    };
    let mut model = MaterialClassifier::new(arch, mfcc, cfg.sgd.seed)?;
    let mut norm = Standardizer::fit(
        arch.n_coeffs,
        train
            .iter()
            .flat_map(|d| d.mfcc.frames.iter().map(|f| f.as_slice())),
    )?;
    norm.round_to_f32();
    model.norm = norm;

    let xs = train
        .iter()
        .map(|d| model.prepare(&d.mfcc))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<usize> = train.iter().map(|d| d.label.index()).collect();
    let mut history = vec![mean_loss(&model, &xs, &ys)?];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sgd.seed ^ 0x5eed);
    let mut opt = Momentum::new(model.params.len(), cfg.sgd.lr, cfg.sgd.momentum);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut best: Option<(f64, MaterialClassifier)> = None;
    for epoch in 0..cfg.sgd.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.sgd.batch) {
            let mut grad = vec![0.0; model.params.len()];
            for &i in batch {
                let cache = model.forward(&xs[i]);
                epoch_loss += -cache.probs[ys[i]].max(f64::MIN_POSITIVE).ln();
                model.backward(&cache, ys[i], &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(&mut model.params, &grad);
        }
        epoch_loss /= xs.len() as f64;
        if !epoch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!(
                "classifier loss became {epoch_loss} in epoch {epoch}"
            )));
        }
        let mut snapshot = model.clone();
        round_to_f32(&mut snapshot.params);
        let acc = evaluate_classifier(&snapshot, held_out)?.accuracy;
        history.push(mean_loss(&snapshot, &xs, &ys)?);
        log::debug!(
            "classifier epoch {epoch}: train loss {epoch_loss:.4}, held-out accuracy {acc:.4}"
        );
        if best.as_ref().is_none_or(|(a, _)| acc > *a) {
            best = Some((acc, snapshot));
        }
    }
    let model = best.expect("at least one epoch").1;
    let metrics = evaluate_classifier(&model, held_out)?;
    Ok(TrainedClassifier {
        model,
        metrics,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MaterialClassifier {
        let arch = ClassifierArch {
            n_coeffs: 3,
            n_frames: 14,
            channels: [2, 3],
            kernel: 3,
            n_classes: 5,
        };
        MaterialClassifier::new(arch, MfccConfig::default(), 1).unwrap()
    }

    #[test]
    fn standard_shapes() {
        let a = ClassifierArch::standard(&MfccConfig::default());
        assert_eq!((a.n_coeffs, a.n_frames), (13, 98));
        // 96 → 48 → 46 → 23
        assert_eq!(a.lens(), [96, 48, 46, 23]);
        assert_eq!(
            a.n_params(),
            16 * 13 * 3 + 16 + 32 * 16 * 3 + 32 + 5 * 32 + 5
        );
    }

    #[test]
    fn probabilities_are_normalized() {
        let m = tiny();
        let x: Vec<f64> = (0..42)
            .map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0)
            .collect();
        let p = m.probabilities(&x).unwrap();
        assert_eq!(p.len(), 5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.probabilities(&x[..41]).is_err());
    }

    #[test]
    fn odd_lengths_pool_by_floor() {
        let arch = ClassifierArch {
            n_coeffs: 2,
            n_frames: 11,
            channels: [2, 2],
            kernel: 3,
            n_classes: 3,
        };
        // 9 → 4 → 2 → 1
        assert_eq!(arch.lens(), [9, 4, 2, 1]);
        assert!(ClassifierArch {
            n_frames: 7,
            ..arch
        }
        .validate()
        .is_err());
    }
}
