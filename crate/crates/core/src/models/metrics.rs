//! Evaluation metrics for both models.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Material, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub accuracy: f64,
    /// Per class; NaN where the class was never predicted.
    pub precision: Vec<f64>,
    /// Per class; NaN where the class has no support.
    pub recall: Vec<f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl ClassifierMetrics {
    pub fn from_predictions(
        truth: &[usize],
        predicted: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch(
                "truth and predictions differ in length".into(),
            ));
        }
        if truth.is_empty() {
            return Err(Error::EmptyDataset("no predictions to score".into()));
        }
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::invalid(format!(
                    "class index out of range ({t}, {p})"
                )));
            }
            confusion[t][p] += 1;
        }
        let correct: usize = (0..n_classes).map(|i| confusion[i][i]).sum();
        let precision = (0..n_classes)
            .map(|j| {
                let col: usize = confusion.iter().map(|row| row[j]).sum();
                confusion[j][j] as f64 / col as f64
            })
            .collect();
        let recall = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| row[i] as f64 / row.iter().sum::<usize>() as f64)
            .collect();
        Ok(ClassifierMetrics {
            accuracy: correct as f64 / truth.len() as f64,
            precision,
            recall,
            confusion,
        })
    }

    pub fn support(&self) -> Vec<usize> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    /// `section,true,predicted,value` rows: the summary, per-class
    /// precision/recall, then the confusion matrix.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,true,predicted,value\n");
        writeln!(out, "accuracy,,,{}", self.accuracy).unwrap();
        for (i, m) in Material::ALL.iter().enumerate().take(self.confusion.len()) {
            writeln!(out, "precision,{m},,{}", self.precision[i]).unwrap();
            writeln!(out, "recall,{m},,{}", self.recall[i]).unwrap();
        }
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, n) in row.iter().enumerate() {
                writeln!(
                    out,
                    "confusion,{},{},{n}",
                    Material::ALL[i],
                    Material::ALL[j]
                )
                .unwrap();
            }
        }
        out
    }
}

/// Area under the ROC curve by the rank statistic, ties counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(
            "scores and labels differ in length".into(),
        ));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid(
            "AUC needs both positive and negative examples",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * avg;
        i = j + 1;
    }
    Ok((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorMetrics {
    pub samples: usize,
    pub slip_auc: f64,
    /// N
    pub force_mae: f64,
    /// Standard deviation of the target force over the evaluated samples, N.
    pub force_std: f64,
    /// Mean Euclidean distance between predicted and true max-force cell.
    pub cell_distance: f64,
    pub mean_slip_prob: f64,
    pub slip_rate: f64,
}

impl PredictorMetrics {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nsamples,{}\nslip_auc,{}\nforce_mae,{}\nforce_std,{}\ncell_distance,{}\nmean_slip_prob,{}\nslip_rate,{}\n",
            self.samples, self.slip_auc, self.force_mae, self.force_std, self.cell_distance, self.mean_slip_prob, self.slip_rate
        )
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rows_sum_to_support() {
        let truth = [0, 0, 1, 2, 2, 2, 4];
        let pred = [0, 1, 1, 2, 0, 2, 4];
        let m = ClassifierMetrics::from_predictions(&truth, &pred, 5).unwrap();
        assert_eq!(m.support(), vec![2, 1, 3, 0, 1]);
        assert!((m.accuracy - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(m.precision[0], 0.5);
        assert!(m.recall[3].is_nan());
        assert_eq!(
            m.to_csv()
                .lines()
                .filter(|l| l.starts_with("confusion"))
                .count(),
            25
        );
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(),
            0.0
        );
        assert_eq!(
            roc_auc(&[0.5; 4], &[false, true, false, true]).unwrap(),
            0.5
        );
        // one inverted pair out of four
        assert_eq!(
            roc_auc(&[0.1, 0.6, 0.5, 0.9], &[false, false, true, true]).unwrap(),
            0.75
        );
        assert!(roc_auc(&[0.1], &[true]).is_err());
    }

    #[test]
    fn auc_matches_pair_count() {
        let scores = [0.3, 0.3, 0.7, 0.1, 0.9, 0.3, 0.5];
        let labels = [true, false, true, false, false, true, true];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        assert!((roc_auc(&scores, &labels).unwrap() - wins / pairs).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
