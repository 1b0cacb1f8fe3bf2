//! Slip labels from thresholded joint-angle change.

use crate::{Error, Result, NUM_JOINTS};

/// Frozen after calibration against simulator ground truth (see
/// `calibration_keeps_default_near_best` below).
pub const DEFAULT_SLIP_THRESHOLD: f64 = 0.02;
/// 5 steps = 25 ms at the sim step.
pub const DEFAULT_SLIP_HORIZON: usize = 5;

/// Slip at step t iff some joint moved more than `threshold` since step
/// t − horizon. Steps earlier than `horizon` compare against step 0.
pub fn label_slip(
    history: &[[f64; NUM_JOINTS]],
    threshold: f64,
    horizon: usize,
) -> Result<Vec<bool>> {
    if horizon == 0 {
        return Err(Error::invalid("slip horizon must be at least 1"));
    }
    if history.len() < horizon {
        return Err(Error::invalid(format!(
            "joint history of {} steps is shorter than the horizon {horizon}",
            history.len()
        )));
    }
    Ok((0..history.len())
        .map(|t| {
            let past = &history[t.saturating_sub(horizon)];
            history[t]
                .iter()
                .zip(past)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                > threshold
        })
        .collect())
}

pub fn f1_score(predicted: &[bool], truth: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

/// Threshold among `candidates` maximizing pooled F1 against ground truth.
/// Returns (threshold, f1); ties keep the smaller threshold.
pub fn calibrate_slip_threshold(
    trials: &[(Vec<[f64; NUM_JOINTS]>, Vec<bool>)],
    horizon: usize,
    candidates: &[f64],
) -> Result<(f64, f64)> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate thresholds"));
    }
    let mut best = (candidates[0], -1.0);
    for &thr in candidates {
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (history, labels) in trials {
            pred.extend(label_slip(history, thr, horizon)?);
            truth.extend_from_slice(labels);
        }
        let f1 = f1_score(&pred, &truth);
        if f1 > best.1 {
            best = (thr, f1);
        }
    }
    Ok(best)
}
