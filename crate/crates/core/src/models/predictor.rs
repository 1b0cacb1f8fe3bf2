//! Recurrent slip / max-force predictor: one GRU layer over a feature window,
//! read out from the last hidden state by four affine heads (slip logit,
//! normalized force, row/15, col/15).
//!
//! The cell follows the usual convention with separate input and recurrent
//! biases:
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z  = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{decode_model, encode_model, ModelBlob, ModelKind};
use super::metrics::{mean, roc_auc, std_dev, PredictorMetrics};
use super::nn::{
    bce_with_logit, clip_norm, round_to_f32, sigmoid, Momentum, SgdConfig, Standardizer,
};
use crate::controller::motion::MotionKind;
use crate::dataset::{FeatureSequence, StepTruth};
use crate::tactile::{FeatureWindow, FEATURE_DIM};
use crate::{Error, Material, Result, GRID_COLS, GRID_ROWS};

/// Steps ahead the targets are taken from (50 ms at the sim step).
pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_HIDDEN: usize = 32;
const HEADS: usize = 4;
const ROW_SCALE: f64 = (GRID_ROWS - 1) as f64;
const COL_SCALE: f64 = (GRID_COLS - 1) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "scope", content = "material", rename_all = "lowercase")]
pub enum Scope {
    Default,
    Material(Material),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Default => f.write_str("default"),
            Scope::Material(m) => write!(f, "material/{m}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorArch {
    pub input_dim: usize,
    pub hidden: usize,
    pub window: usize,
    pub horizon: usize,
}

impl PredictorArch {
    pub fn standard() -> Self {
        PredictorArch {
            input_dim: FEATURE_DIM,
            hidden: DEFAULT_HIDDEN,
            window: DEFAULT_WINDOW,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.window < 2 {
            return Err(Error::invalid(
                "predictor needs input_dim, hidden > 0 and window >= 2",
            ));
        }
        Ok(())
    }

    fn offsets(&self) -> Offsets {
        let (d, h) = (self.input_dim, self.hidden);
        let w_ih = 0;
        let w_hh = w_ih + 3 * h * d;
        let b_ih = w_hh + 3 * h * h;
        let b_hh = b_ih + 3 * h;
        let w_out = b_hh + 3 * h;
        let b_out = w_out + HEADS * h;
        Offsets {
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            w_out,
            b_out,
            total: b_out + HEADS,
        }
    }

    pub fn n_params(&self) -> usize {
        self.offsets().total
    }
}

struct Offsets {
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub slip_prob: f64,
    /// N
    pub force_value: f64,
    /// Fractional (row, col), clamped to the grid.
    pub cell: (f64, f64),
}

/// Regression and classification targets of one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    pub slip: bool,
    /// N
    pub force: f64,
    pub row: f64,
    pub col: f64,
}

impl From<&StepTruth> for Target {
    fn from(s: &StepTruth) -> Self {
        Target {
            slip: s.slip,
            force: s.max_force,
            row: s.max_cell.0 as f64,
            col: s.max_cell.1 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Descriptor {
    arch: PredictorArch,
    motion: MotionKind,
    scope: Scope,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlipPredictor {
    arch: PredictorArch,
    motion: MotionKind,
    scope: Scope,
    params: Vec<f64>,
    input_norm: Standardizer,
    /// Mean and std of the force target, N.
    force_norm: (f64, f64),
}

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// W_hn h + b_hn
    gh_n: Vec<f64>,
}

struct Forward {
    steps: Vec<StepCache>,
    h: Vec<f64>,
    out: [f64; HEADS],
}

impl SlipPredictor {
    /// Uniform(±1/√hidden) initialization.
    pub fn new(arch: PredictorArch, motion: MotionKind, scope: Scope, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (arch.hidden as f64).sqrt();
        let params = (0..arch.n_params())
            .map(|_| f64::from(rng.random_range(-bound..bound) as f32))
            .collect();
        Ok(SlipPredictor {
            arch,
            motion,
            scope,
            params,
            input_norm: Standardizer::identity(arch.input_dim),
            force_norm: (0.0, 1.0),
        })
    }

    pub fn arch(&self) -> &PredictorArch {
        &self.arch
    }

    pub fn motion(&self) -> MotionKind {
        self.motion
    }

    pub fn scope(&self) -> Scope {
        self.scope
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

    pub fn force_norm(&self) -> (f64, f64) {
        self.force_norm
    }

    fn forward(&self, xs: &[Vec<f64>]) -> Forward {
        let (d, hd) = (self.arch.input_dim, self.arch.hidden);
        let off = self.arch.offsets();
        let p = &self.params;
        let mut h = vec![0.0; hd];
        let mut steps = Vec::with_capacity(xs.len());
        let mut gi = vec![0.0; 3 * hd];
        let mut gh = vec![0.0; 3 * hd];
        for x in xs {
            for (row, (gi_v, gh_v)) in gi.iter_mut().zip(gh.iter_mut()).enumerate() {
                let wi = &p[off.w_ih + row * d..off.w_ih + (row + 1) * d];
                let wh = &p[off.w_hh + row * hd..off.w_hh + (row + 1) * hd];
                *gi_v = p[off.b_ih + row] + wi.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                *gh_v = p[off.b_hh + row] + wh.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
            }
            let mut r = vec![0.0; hd];
            let mut z = vec![0.0; hd];
            let mut n = vec![0.0; hd];
            let mut h_new = vec![0.0; hd];
            for j in 0..hd {
                r[j] = sigmoid(gi[j] + gh[j]);
                z[j] = sigmoid(gi[hd + j] + gh[hd + j]);
                n[j] = (gi[2 * hd + j] + r[j] * gh[2 * hd + j]).tanh();
                h_new[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
            }
            steps.push(StepCache {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h, h_new),
                r,
                z,
                n,
                gh_n: gh[2 * hd..].to_vec(),
            });
        }
        let mut out = [0.0; HEADS];
        for (k, o) in out.iter_mut().enumerate() {
            let w = &p[off.w_out + k * hd..off.w_out + (k + 1) * hd];
            *o = p[off.b_out + k] + w.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        }
        Forward { steps, h, out }
    }

    fn loss_terms(&self, out: &[f64; HEADS], t: &Target) -> (f64, [f64; HEADS]) {
        let f = (t.force - self.force_norm.0) / self.force_norm.1;
        let (r, c) = (t.row / ROW_SCALE, t.col / COL_SCALE);
        let y = if t.slip { 1.0 } else { 0.0 };
        let loss = bce_with_logit(out[0], y)
            + (out[1] - f).powi(2)
            + ((out[2] - r).powi(2) + (out[3] - c).powi(2)) / 2.0;
        let d = [
            sigmoid(out[0]) - y,
            2.0 * (out[1] - f),
            out[2] - r,
            out[3] - c,
        ];
        (loss, d)
    }

    fn backward(&self, fwd: &Forward, dout: &[f64; HEADS], grad: &mut [f64]) {
        let (d, hd) = (self.arch.input_dim, self.arch.hidden);
        let off = self.arch.offsets();
        let p = &self.params;
        let mut dh = vec![0.0; hd];
        for (k, dk) in dout.iter().enumerate() {
            grad[off.b_out + k] += dk;
            for j in 0..hd {
                grad[off.w_out + k * hd + j] += dk * fwd.h[j];
                dh[j] += p[off.w_out + k * hd + j] * dk;
            }
        }
        let mut dgi = vec![0.0; 3 * hd];
        let mut dgh = vec![0.0; 3 * hd];
        for s in fwd.steps.iter().rev() {
            let mut dh_prev = vec![0.0; hd];
            for j in 0..hd {
                let dn = dh[j] * (1.0 - s.z[j]);
                let dz = dh[j] * (s.h_prev[j] - s.n[j]);
                dh_prev[j] = dh[j] * s.z[j];
                let dan = dn * (1.0 - s.n[j] * s.n[j]);
                let dr = dan * s.gh_n[j];
                let dar = dr * s.r[j] * (1.0 - s.r[j]);
                let daz = dz * s.z[j] * (1.0 - s.z[j]);
                dgi[j] = dar;
                dgh[j] = dar;
                dgi[hd + j] = daz;
                dgh[hd + j] = daz;
                dgi[2 * hd + j] = dan;
                dgh[2 * hd + j] = dan * s.r[j];
            }
            for row in 0..3 * hd {
                let gi = dgi[row];
                let gh = dgh[row];
                grad[off.b_ih + row] += gi;
                grad[off.b_hh + row] += gh;
                let wi = &mut grad[off.w_ih + row * d..off.w_ih + (row + 1) * d];
                for (g, x) in wi.iter_mut().zip(&s.x) {
                    *g += gi * x;
                }
                let base = off.w_hh + row * hd;
                for j in 0..hd {
                    grad[base + j] += gh * s.h_prev[j];
                    dh_prev[j] += p[base + j] * gh;
                }
            }
            dh = dh_prev;
        }
    }

    /// Joint loss for an already-standardized input sequence and its gradient
    /// with respect to every parameter.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], target: &Target) -> Result<(f64, Vec<f64>)> {
        self.check_sequence(xs)?;
        let fwd = self.forward(xs);
        let (loss, dout) = self.loss_terms(&fwd.out, target);
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&fwd, &dout, &mut grad);
        Ok((loss, grad))
    }

    pub fn loss(&self, xs: &[Vec<f64>], target: &Target) -> Result<f64> {
        self.check_sequence(xs)?;
        Ok(self.loss_terms(&self.forward(xs).out, target).0)
    }

    fn check_sequence(&self, xs: &[Vec<f64>]) -> Result<()> {
        if xs.len() != self.arch.window {
            return Err(Error::ShapeMismatch(format!(
                "window of {} steps, model expects {}",
                xs.len(),
                self.arch.window
            )));
        }
        if xs.iter().any(|x| x.len() != self.arch.input_dim) {
            return Err(Error::ShapeMismatch(format!(
                "feature vectors must have {} entries",
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    /// Standardizes raw feature rows.
    pub fn prepare(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rows.len() != self.arch.window {
            return Err(Error::ShapeMismatch(format!(
                "window of {} steps, model expects {}",
                rows.len(),
                self.arch.window
            )));
        }
        rows.iter()
            .map(|r| {
                if r.len() != self.arch.input_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "feature vectors must have {} entries",
                        self.arch.input_dim
                    )));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("feature window"));
                }
                let mut out = vec![0.0; r.len()];
                self.input_norm.apply_row(r, &mut out);
                Ok(out)
            })
            .collect()
    }

    fn decode(&self, out: &[f64; HEADS]) -> Prediction {
        Prediction {
            slip_prob: sigmoid(out[0]),
            force_value: out[1] * self.force_norm.1 + self.force_norm.0,
            cell: (
                (out[2] * ROW_SCALE).clamp(0.0, ROW_SCALE),
                (out[3] * COL_SCALE).clamp(0.0, COL_SCALE),
            ),
        }
    }

    /// Prediction from raw (unstandardized) feature rows.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Prediction> {
        let xs = self.prepare(rows)?;
        Ok(self.decode(&self.forward(&xs).out))
    }

    pub fn predict(&self, window: &FeatureWindow) -> Result<Prediction> {
        let rows: Vec<Vec<f64>> = window.vectors.iter().map(|v| v.to_vec()).collect();
        self.predict_rows(&rows)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let descriptor = serde_json::to_string(&Descriptor {
            arch: self.arch,
            motion: self.motion,
            scope: self.scope,
        })
        .map_err(|e| Error::malformed("predictor descriptor", e.to_string()))?;
        let params = self
            .params
            .iter()
            .copied()
            .chain(self.input_norm.flat())
            .chain([self.force_norm.0, self.force_norm.1])
            .map(|v| v as f32)
            .collect();
        Ok(encode_model(&ModelBlob {
            kind: ModelKind::Predictor,
            descriptor,
            params,
        }))
    }

    /// Parameter block: network weights, input mean and std per feature, then
    /// force mean and std.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let blob = decode_model(bytes)?;
        if blob.kind != ModelKind::Predictor {
            return Err(Error::malformed("model", "not a predictor"));
        }
        let d: Descriptor = serde_json::from_str(&blob.descriptor)
            .map_err(|e| Error::malformed("predictor descriptor", e.to_string()))?;
        d.arch.validate()?;
        let n = d.arch.n_params();
        let expected = n
            .checked_add(2 * d.arch.input_dim + 2)
            .ok_or_else(|| Error::malformed("predictor", "size overflow"))?;
        if blob.params.len() != expected {
            return Err(Error::malformed(
                "predictor",
                format!(
                    "{} parameters, architecture needs {expected}",
                    blob.params.len()
                ),
            ));
        }
        let values: Vec<f64> = blob.params.iter().map(|&v| f64::from(v)).collect();
        let input_norm = Standardizer::from_flat(&values[n..n + 2 * d.arch.input_dim]);
        let force_norm = (values[expected - 2], values[expected - 1]);
        if input_norm.std.iter().any(|s| *s <= 0.0) || force_norm.1 <= 0.0 {
            return Err(Error::malformed(
                "predictor",
                "non-positive standard deviation",
            ));
        }
        Ok(SlipPredictor {
            arch: d.arch,
            motion: d.motion,
            scope: d.scope,
            params: values[..n].to_vec(),
            input_norm,
            force_norm,
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorTrainConfig {
    pub sgd: SgdConfig,
    pub hidden: usize,
    pub window: usize,
    pub horizon: usize,
    /// Keep every `stride`-th training window.
    pub stride: usize,
    pub clip_norm: f64,
}

impl Default for PredictorTrainConfig {
    fn default() -> Self {
        PredictorTrainConfig {
            sgd: SgdConfig {
                epochs: 8,
                lr: 0.01,
                momentum: 0.9,
                batch: 32,
                seed: 0,
            },
            hidden: DEFAULT_HIDDEN,
            window: DEFAULT_WINDOW,
            horizon: DEFAULT_HORIZON,
            stride: 3,
            clip_norm: 5.0,
        }
    }
}

impl PredictorTrainConfig {
    /// Settings for continuing from a default model on one material's data.
    pub fn fine_tune(&self) -> Self {
        PredictorTrainConfig {
            sgd: SgdConfig {
                epochs: 6,
                lr: self.sgd.lr * 0.5,
                ..self.sgd
            },
            stride: 2,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedPredictor {
    pub model: SlipPredictor,
    /// Metrics on the held-out sequences passed to training.
    pub metrics: PredictorMetrics,
    /// Mean training loss before training and after each epoch.
    pub loss_history: Vec<f64>,
}

fn in_scope(seq: &FeatureSequence, motion: MotionKind, scope: Scope) -> bool {
    seq.motion == motion
        && match scope {
            Scope::Default => true,
            Scope::Material(m) => seq.material == m,
        }
}

/// (sequence, window end) pairs of every valid window, thinned by `stride`.
fn sample_index(
    seqs: &[&FeatureSequence],
    window: usize,
    horizon: usize,
    stride: usize,
) -> Vec<(usize, usize)> {
    seqs.iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.window_ends(window, horizon)
                .into_iter()
                .step_by(stride.max(1))
                .map(move |e| (i, e))
        })
        .collect()
}

/// Prepared inputs and targets for a sample index.
fn materialize(
    model: &SlipPredictor,
    seqs: &[&FeatureSequence],
    index: &[(usize, usize)],
) -> Result<Vec<(Vec<Vec<f64>>, Target)>> {
    let (w, h) = (model.arch.window, model.arch.horizon);
    index
        .iter()
        .map(|&(i, e)| {
            Ok((
                model.prepare(seqs[i].window(e, w))?,
                Target::from(seqs[i].target(e, h)),
            ))
        })
        .collect()
}

/// Slip probability and true label for every valid window of `seqs` on the
/// model's motion.
pub fn slip_scores(
    model: &SlipPredictor,
    seqs: &[FeatureSequence],
) -> Result<(Vec<f64>, Vec<bool>)> {
    let refs: Vec<&FeatureSequence> = seqs.iter().filter(|s| s.motion == model.motion).collect();
    let index = sample_index(&refs, model.arch.window, model.arch.horizon, 1);
    let mut probs = Vec::with_capacity(index.len());
    let mut labels = Vec::with_capacity(index.len());
    for &(i, e) in &index {
        probs.push(
            model
                .predict_rows(refs[i].window(e, model.arch.window))?
                .slip_prob,
        );
        labels.push(refs[i].target(e, model.arch.horizon).slip);
    }
    Ok((probs, labels))
}

/// Evaluates on every valid window of `seqs` (stride 1).
pub fn evaluate_predictor(
    model: &SlipPredictor,
    seqs: &[FeatureSequence],
) -> Result<PredictorMetrics> {
    let refs: Vec<&FeatureSequence> = seqs.iter().filter(|s| s.motion == model.motion).collect();
    let index = sample_index(&refs, model.arch.window, model.arch.horizon, 1);
    if index.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no {} windows to evaluate",
            model.motion
        )));
    }
    let mut probs = Vec::with_capacity(index.len());
    let mut labels = Vec::with_capacity(index.len());
    let mut abs_err = Vec::with_capacity(index.len());
    let mut forces = Vec::with_capacity(index.len());
    let mut cell_dist = Vec::with_capacity(index.len());
    for &(i, e) in &index {
        let seq = refs[i];
        let pred = model.predict_rows(seq.window(e, model.arch.window))?;
        let t = Target::from(seq.target(e, model.arch.horizon));
        probs.push(pred.slip_prob);
        labels.push(t.slip);
        abs_err.push((pred.force_value - t.force).abs());
        forces.push(t.force);
        cell_dist.push(((pred.cell.0 - t.row).powi(2) + (pred.cell.1 - t.col).powi(2)).sqrt());
    }
    let positives = labels.iter().filter(|&&l| l).count();
    Ok(PredictorMetrics {
        samples: index.len(),
        slip_auc: roc_auc(&probs, &labels).unwrap_or(f64::NAN),
        force_mae: mean(&abs_err),
        force_std: std_dev(&forces),
        cell_distance: mean(&cell_dist),
        mean_slip_prob: mean(&probs),
        slip_rate: positives as f64 / labels.len() as f64,
    })
}

/// Trains a predictor for `motion` on the sequences in `scope`. With `init`
/// the run continues from that model's weights and normalization; otherwise
/// it starts from a seeded initialization with statistics fitted on the
/// training windows. The epoch with the lowest held-out loss is kept.
pub fn train_predictor(
    train: &[FeatureSequence],
    held_out: &[FeatureSequence],
    motion: MotionKind,
    scope: Scope,
    cfg: &PredictorTrainConfig,
    init: Option<&SlipPredictor>,
) -> Result<TrainedPredictor> {
    cfg.sgd.validate()?;
    let train_refs: Vec<&FeatureSequence> = train
        .iter()
        .filter(|s| in_scope(s, motion, scope))
        .collect();
    let held_refs: Vec<&FeatureSequence> = held_out
        .iter()
        .filter(|s| in_scope(s, motion, scope))
        .collect();
    let arch = PredictorArch {
        input_dim: FEATURE_DIM,
        hidden: cfg.hidden,
        window: cfg.window,
        horizon: cfg.horizon,
    };
    let train_index = sample_index(&train_refs, arch.window, arch.horizon, cfg.stride);
    let held_index = sample_index(&held_refs, arch.window, arch.horizon, cfg.stride);
    if train_index.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no training windows for {motion}, {scope}"
        )));
    }
    if held_index.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no held-out windows for {motion}, {scope}"
        )));
    }

    let mut model = match init {
        Some(base) => {
            if base.arch != arch || base.motion != motion {
                return Err(Error::ShapeMismatch(
                    "initial model does not match the requested architecture".into(),
                ));
            }
            SlipPredictor {
                scope,
                ..base.clone()
            }
        }
        None => {
            let mut m = SlipPredictor::new(arch, motion, scope, cfg.sgd.seed)?;
            let mut norm = Standardizer::fit(
                arch.input_dim,
                train_index
                    .iter()
                    .map(|&(i, e)| train_refs[i].features[e].as_slice()),
            )?;
            norm.round_to_f32();
            m.input_norm = norm;
            let forces: Vec<f64> = train_index
                .iter()
                .map(|&(i, e)| train_refs[i].target(e, arch.horizon).max_force)
                .collect();
            m.force_norm = (
                f64::from(mean(&forces) as f32),
                f64::from(std_dev(&forces).max(1e-6) as f32),
            );
            m
        }
    };

    let train_set = materialize(&model, &train_refs, &train_index)?;
    let held_set = materialize(&model, &held_refs, &held_index)?;
    let mean_loss = |m: &SlipPredictor, set: &[(Vec<Vec<f64>>, Target)]| -> f64 {
        set.iter()
            .map(|(x, t)| m.loss_terms(&m.forward(x).out, t).0)
            .sum::<f64>()
            / set.len() as f64
    };

    let mut history = vec![mean_loss(&model, &train_set)];
    let mut best = (mean_loss(&model, &held_set), model.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sgd.seed ^ 0x9e3779b9);
    let mut opt = Momentum::new(model.params.len(), cfg.sgd.lr, cfg.sgd.momentum);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.sgd.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.sgd.batch) {
            let mut grad = vec![0.0; model.params.len()];
            for &i in batch {
                let (x, t) = &train_set[i];
                let fwd = model.forward(x);
                let (_, dout) = model.loss_terms(&fwd.out, t);
                model.backward(&fwd, &dout, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            clip_norm(&mut grad, cfg.clip_norm);
            opt.step(&mut model.params, &grad);
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!(
                "predictor weights became non-finite in epoch {epoch}"
            )));
        }
        let mut snapshot = model.clone();
        round_to_f32(&mut snapshot.params);
        let train_loss = mean_loss(&snapshot, &train_set);
        let held_loss = mean_loss(&snapshot, &held_set);
        if !train_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "predictor loss became {train_loss} in epoch {epoch}"
            )));
        }
        history.push(train_loss);
        log::debug!("predictor {motion} {scope} epoch {epoch}: train {train_loss:.4}, held-out {held_loss:.4}");
        if held_loss < best.0 {
            best = (held_loss, snapshot);
        }
    }
    let mut model = best.1;
    round_to_f32(&mut model.params);
    let held_owned: Vec<FeatureSequence> = held_refs.into_iter().cloned().collect();
    let metrics = evaluate_predictor(&model, &held_owned)?;
    Ok(TrainedPredictor {
        model,
        metrics,
        loss_history: history,
    })
}
