//! Training and evaluation driven from a stored, split dataset.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::active::{build_likelihood, MotionLikelihoodModel};
use crate::controller::motion::MotionKind;
use crate::dataset::{map_split, trial_segments, DatasetManifest, FeatureSequence, Split};
use crate::dsp::{augment_segment, MfccConfig, MfccExtractor, TRAIN_SEGMENT_HOP_S};
use crate::models::{
    evaluate_classifier, evaluate_predictor, roc_auc, slip_scores, train_classifier,
    train_predictor, ClassifierMetrics, ClassifierTrainConfig, LabeledMfcc, MaterialClassifier,
    ModelRegistry, PredictorMetrics, PredictorTrainConfig, Scope, TrainedClassifier,
};
use crate::{Error, Material, Result};

/// MFCCs of every one-second motion segment in `split`, tagged with the
/// motion that produced them. With `augment_seed` each segment is followed by
/// its augmented variants.
pub fn load_segments(
    root: &Path,
    manifest: &DatasetManifest,
    split: Split,
    extractor: &MfccExtractor,
    augment_seed: Option<u64>,
) -> Result<Vec<(MotionKind, LabeledMfcc)>> {
    let per_trial = map_split(root, manifest, split, |entry, record| {
        let mut out = Vec::new();
        for (k, seg) in trial_segments(&record, TRAIN_SEGMENT_HOP_S)?
            .into_iter()
            .enumerate()
        {
            let mut variants = vec![seg.clone()];
            if let Some(seed) = augment_seed {
                let s = seed ^ entry.seed.rotate_left(17) ^ k as u64;
                variants.extend(augment_segment(&seg, s)?);
            }
            for v in variants {
                out.push((
                    entry.motion_kind(),
                    LabeledMfcc {
                        mfcc: extractor.segment(&v)?,
                        label: record.material,
                        source_trial: record.trial_id.clone(),
                    },
                ));
            }
        }
        Ok(out)
    })?;
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn load_sequences(
    root: &Path,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<Vec<FeatureSequence>> {
    map_split(root, manifest, split, |_, record| {
        FeatureSequence::from_record(&record)
    })
}

fn strip(data: Vec<(MotionKind, LabeledMfcc)>) -> Vec<LabeledMfcc> {
    data.into_iter().map(|(_, d)| d).collect()
}

#[derive(Clone, Debug)]
pub struct ClassifierRun {
    pub trained: TrainedClassifier,
    /// Metrics on the test split.
    pub test_metrics: ClassifierMetrics,
    /// Likelihoods estimated from the classifier's test-split confusions.
    pub likelihood: MotionLikelihoodModel,
    pub train_segments: usize,
    pub test_segments: usize,
}

/// Trains on augmented train segments, selects the epoch on validation
/// segments and reports on test segments.
pub fn train_classifier_on_dataset(
    root: &Path,
    manifest: &DatasetManifest,
    cfg: &ClassifierTrainConfig,
    augment: bool,
) -> Result<ClassifierRun> {
    let extractor = MfccExtractor::new(MfccConfig::default())?;
    let train = strip(load_segments(
        root,
        manifest,
        Split::Train,
        &extractor,
        augment.then_some(cfg.sgd.seed),
    )?);
    let val = strip(load_segments(root, manifest, Split::Val, &extractor, None)?);
    let test = load_segments(root, manifest, Split::Test, &extractor, None)?;
    log::info!(
        "classifier segments: {} train, {} val, {} test",
        train.len(),
        val.len(),
        test.len()
    );
    let trained = train_classifier(&train, &val, cfg)?;
    let likelihood = build_likelihood(&trained.model, &test)?;
    let test_plain = strip(test);
    let test_metrics = evaluate_classifier(&trained.model, &test_plain)?;
    Ok(ClassifierRun {
        trained,
        test_metrics,
        likelihood,
        train_segments: train.len(),
        test_segments: test_plain.len(),
    })
}

#[derive(Clone, Debug)]
pub struct PredictorReport {
    pub scope: Scope,
    pub motion: MotionKind,
    /// Metrics on the test split.
    pub test: PredictorMetrics,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PredictorRun {
    pub registry: ModelRegistry,
    pub reports: Vec<PredictorReport>,
    /// Slip AUC over the test windows of every motion, each scored by its
    /// default model. NaN when the test split holds no slip or no non-slip.
    pub pooled_slip_auc: f64,
}

fn scoped(seqs: &[FeatureSequence], motion: MotionKind, scope: Scope) -> Vec<FeatureSequence> {
    seqs.iter()
        .filter(|s| {
            s.motion == motion
                && match scope {
                    Scope::Default => true,
                    Scope::Material(m) => s.material == m,
                }
        })
        .cloned()
        .collect()
}

/// Per-model test metrics and the pooled slip AUC of the default models.
fn evaluate_registry(
    registry: &ModelRegistry,
    test: &[FeatureSequence],
) -> Result<(Vec<PredictorReport>, f64)> {
    let mut pooled = (Vec::new(), Vec::new());
    let mut reports = Vec::new();
    for model in registry.models() {
        let (scope, motion) = (model.scope(), model.motion());
        let held = scoped(test, motion, scope);
        if held.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "no test trials for {motion}, {scope}"
            )));
        }
        if scope == Scope::Default {
            let (p, l) = slip_scores(model, &held)?;
            pooled.0.extend(p);
            pooled.1.extend(l);
        }
        reports.push(PredictorReport {
            scope,
            motion,
            test: evaluate_predictor(model, &held)?,
            loss_history: Vec::new(),
        });
    }
    let auc = roc_auc(&pooled.0, &pooled.1).unwrap_or(f64::NAN);
    Ok((reports, auc))
}

/// Test-split metrics of already trained predictors.
pub fn evaluate_predictors_on_dataset(
    root: &Path,
    manifest: &DatasetManifest,
    registry: &ModelRegistry,
) -> Result<PredictorRun> {
    let test = load_sequences(root, manifest, Split::Test)?;
    let (reports, pooled_slip_auc) = evaluate_registry(registry, &test)?;
    Ok(PredictorRun {
        registry: registry.clone(),
        reports,
        pooled_slip_auc,
    })
}

/// Test-split metrics of an already trained classifier, with the number of
/// segments scored.
pub fn evaluate_classifier_on_dataset(
    root: &Path,
    manifest: &DatasetManifest,
    classifier: &MaterialClassifier,
) -> Result<(ClassifierMetrics, usize)> {
    let extractor = MfccExtractor::new(classifier.mfcc_config().clone())?;
    let test = strip(load_segments(
        root,
        manifest,
        Split::Test,
        &extractor,
        None,
    )?);
    Ok((evaluate_classifier(classifier, &test)?, test.len()))
}

/// Trains the default predictor of each motion and, when `materials` is
/// set, a material model per (motion, material) fine-tuned from it. Models
/// train in parallel; each run is single-threaded and seeded.
pub fn train_predictors_on_dataset(
    root: &Path,
    manifest: &DatasetManifest,
    motions: &[MotionKind],
    materials: &[Material],
    cfg: &PredictorTrainConfig,
) -> Result<PredictorRun> {
    let train = load_sequences(root, manifest, Split::Train)?;
    let val = load_sequences(root, manifest, Split::Val)?;
    let test = load_sequences(root, manifest, Split::Test)?;

    let defaults = motions
        .par_iter()
        .map(|&motion| {
            train_predictor(&train, &val, motion, Scope::Default, cfg, None).map(|t| (motion, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = cfg.fine_tune();
    let jobs: Vec<(MotionKind, Material)> = motions
        .iter()
        .flat_map(|&m| materials.iter().map(move |&x| (m, x)))
        .collect();
    let specific = jobs
        .par_iter()
        .map(|&(motion, material)| {
            let base = &defaults
                .iter()
                .find(|(m, _)| *m == motion)
                .expect("default trained")
                .1
                .model;
            train_predictor(
                &train,
                &val,
                motion,
                Scope::Material(material),
                &fine,
                Some(base),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut registry = ModelRegistry::new();
    let mut history = BTreeMap::new();
    for t in defaults.into_iter().map(|(_, t)| t).chain(specific) {
        history.insert((t.model.scope(), t.model.motion()), t.loss_history);
        registry.insert(t.model);
    }
    let (mut reports, pooled_slip_auc) = evaluate_registry(&registry, &test)?;
    for r in &mut reports {
        r.loss_history = history.remove(&(r.scope, r.motion)).unwrap_or_default();
    }
    Ok(PredictorRun {
        registry,
        reports,
        pooled_slip_auc,
    })
}
