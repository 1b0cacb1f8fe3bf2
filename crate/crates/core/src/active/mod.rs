//! Bayesian material inference over classifier outcomes and motion selection
//! by expected information gain.

mod explore;

pub use explore::{
    action_motion, build_likelihood, run_active_loop, ActiveLog, ActiveStep, Selector,
    ACTIVE_CSV_HEADER, ACTIVE_GRIP,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::controller::motion::MotionKind;
use crate::{Error, Material, Result};

const K: usize = Material::COUNT;

/// Normalizers below this leave the posterior unchanged.
pub const DEGENERATE_NORMALIZER: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    probs: [f64; K],
}

impl Posterior {
    pub fn uniform() -> Self {
        Posterior {
            probs: [1.0 / K as f64; K],
        }
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: [f64; K]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "posterior weights must be finite and non-negative",
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid("posterior weights sum to zero"));
        }
        Ok(Posterior {
            probs: weights.map(|w| w / sum),
        })
    }

    pub fn delta(m: Material) -> Self {
        let mut probs = [0.0; K];
        probs[m.index()] = 1.0;
        Posterior { probs }
    }

    pub fn probs(&self) -> &[f64; K] {
        &self.probs
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    pub fn map_class(&self) -> usize {
        crate::models::argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.log2())
        .sum::<f64>()
}

/// File the likelihood model is stored under next to the classifier.
pub const LIKELIHOOD_FILE: &str = "likelihood.json";

/// Row-stochastic `C[true][predicted]` per motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionLikelihoodModel {
    matrices: BTreeMap<MotionKind, [[f64; K]; K]>,
}

impl MotionLikelihoodModel {
    pub fn new(matrices: BTreeMap<MotionKind, [[f64; K]; K]>) -> Result<Self> {
        let m = MotionLikelihoodModel { matrices };
        m.validate()?;
        Ok(m)
    }

    /// Confusion counts with one pseudo-count added to every cell.
    pub fn from_counts(counts: &BTreeMap<MotionKind, [[usize; K]; K]>) -> Result<Self> {
        let matrices = counts
            .iter()
            .map(|(&motion, c)| {
                let rows = c.map(|row| {
                    let total = row.iter().sum::<usize>() as f64 + K as f64;
                    row.map(|n| (n as f64 + 1.0) / total)
                });
                (motion, rows)
            })
            .collect();
        Self::new(matrices)
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrices.is_empty() {
            return Err(Error::invalid("likelihood model has no motions"));
        }
        for (motion, c) in &self.matrices {
            for row in c {
                if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::invalid(format!(
                        "{motion} confusion matrix has a negative or non-finite entry"
                    )));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "{motion} confusion matrix row does not sum to 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn motions(&self) -> Vec<MotionKind> {
        self.matrices.keys().copied().collect()
    }

    pub fn matrix(&self, motion: MotionKind) -> Result<&[[f64; K]; K]> {
        self.matrices
            .get(&motion)
            .ok_or_else(|| Error::UnknownMotion(motion.name().to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::malformed("likelihood model", e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)
            .map_err(|e| Error::malformed("likelihood model", e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

/// `p'[i] ∝ p[i] · C[i][obs]`.
pub fn update_posterior(
    p: &Posterior,
    motion: MotionKind,
    observed: usize,
    l: &MotionLikelihoodModel,
) -> Result<Posterior> {
    if observed >= K {
        return Err(Error::invalid(format!(
            "observed class {observed} out of range"
        )));
    }
    let c = l.matrix(motion)?;
    let mut w = [0.0; K];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = p.probs[i] * c[i][observed];
    }
    let z: f64 = w.iter().sum();
    if z < DEGENERATE_NORMALIZER {
        log::warn!("degenerate posterior update ({motion}, class {observed}, normalizer {z:e}); keeping the prior");
        return Ok(p.clone());
    }
    Ok(Posterior {
        probs: w.map(|x| x / z),
    })
}

/// `H(p) − Σ_o P(o)·H(p | o)` in bits.
pub fn expected_information_gain(
    p: &Posterior,
    motion: MotionKind,
    l: &MotionLikelihoodModel,
) -> Result<f64> {
    let c = l.matrix(motion)?;
    let mut expected = 0.0;
    for o in 0..K {
        let joint: [f64; K] = std::array::from_fn(|i| p.probs[i] * c[i][o]);
        let p_o: f64 = joint.iter().sum();
        if p_o > 0.0 {
            expected += p_o * entropy_bits(&joint.map(|x| x / p_o));
        }
    }
    // rounding can leave a negative residue of a few ulps
    Ok((p.entropy_bits() - expected).max(0.0))
}

/// Highest-EIG motion; ties go to the earlier motion in [`MotionKind::ALL`].
pub fn select_motion(
    p: &Posterior,
    motions: &[MotionKind],
    l: &MotionLikelihoodModel,
) -> Result<MotionKind> {
    let mut ordered: Vec<MotionKind> = motions.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut best: Option<(MotionKind, f64)> = None;
    for m in ordered {
        let gain = expected_information_gain(p, m, l)?;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((m, gain));
        }
    }
    best.map(|(m, _)| m)
        .ok_or_else(|| Error::invalid("no motions to choose from"))
}
