//! Grip state machine: raise torque while slip is predicted, relax toward the
//! base torque after a run of stable decisions, stiffen under high predicted
//! force.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::models::Prediction;
use crate::sim::{grip_cell_force, GripCommand, TORQUE_TO_NORMAL};
use crate::{Error, Material, Result};

pub const BASE_TORQUE: f64 = 0.4;
pub const MAX_TORQUE: f64 = 1.0;
pub const STIFF_SCALE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Nm
    pub base_torque: f64,
    /// Nm
    pub max_torque: f64,
    pub slip_threshold_prob: f64,
    /// Nm per decision
    pub torque_step_up: f64,
    /// Nm per decision
    pub relax_step: f64,
    pub stable_steps_before_relax: usize,
    /// How far the predicted peak cell force may exceed the grip's own share
    /// of it before the joints stiffen, N. The default is roughly what a 4 N
    /// inertial load adds, the load at which the base grip's friction runs out.
    pub inertial_stiffen_threshold: f64,
    pub classifier_commit_confidence: f64,
    /// Seconds between online classifications.
    pub online_hop_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            base_torque: BASE_TORQUE,
            max_torque: MAX_TORQUE,
            slip_threshold_prob: 0.5,
            torque_step_up: 0.1,
            relax_step: 0.02,
            stable_steps_before_relax: 20,
            inertial_stiffen_threshold: 0.3,
            classifier_commit_confidence: 0.8,
            online_hop_s: crate::dsp::ONLINE_SEGMENT_HOP_S,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.base_torque,
            self.max_torque,
            self.slip_threshold_prob,
            self.torque_step_up,
            self.relax_step,
            self.inertial_stiffen_threshold,
            self.classifier_commit_confidence,
            self.online_hop_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("controller config"));
        }
        if !(BASE_TORQUE..MAX_TORQUE).contains(&self.base_torque)
            || !(self.base_torque < self.max_torque && self.max_torque <= MAX_TORQUE)
        {
            return Err(Error::invalid(format!(
                "need {BASE_TORQUE} <= base_torque < max_torque <= {MAX_TORQUE} Nm"
            )));
        }
        if self.torque_step_up <= 0.0
            || self.relax_step <= 0.0
            || self.stable_steps_before_relax == 0
        {
            return Err(Error::invalid(
                "torque steps and the stable window must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.slip_threshold_prob)
            || !(0.0..=1.0).contains(&self.classifier_commit_confidence)
        {
            return Err(Error::invalid("probability thresholds must lie in [0, 1]"));
        }
        if self.online_hop_s <= 0.0 {
            return Err(Error::invalid("online hop must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GripEventKind {
    TorqueUp { from: f64, to: f64 },
    Relax { from: f64, to: f64 },
    Stiffen,
    Soften,
    ModelSwitch { material: Material },
}

impl fmt::Display for GripEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GripEventKind::TorqueUp { from, to } => write!(f, "torque_up {from:.3}->{to:.3}"),
            GripEventKind::Relax { from, to } => write!(f, "relax {from:.3}->{to:.3}"),
            GripEventKind::Stiffen => f.write_str("stiffen"),
            GripEventKind::Soften => f.write_str("soften"),
            GripEventKind::ModelSwitch { material } => write!(f, "model_switch {material}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripEvent {
    pub t: f64,
    pub kind: GripEventKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GripState {
    /// Nm
    pub applied_torque: f64,
    pub stiffness_scale: f64,
    pub active_material: Option<Material>,
    pub consecutive_stable: usize,
    pub event_log: Vec<GripEvent>,
}

impl GripState {
    pub fn new(cfg: &ControllerConfig) -> Self {
        GripState {
            applied_torque: cfg.base_torque,
            stiffness_scale: 1.0,
            active_material: None,
            consecutive_stable: 0,
            event_log: Vec::new(),
        }
    }

    pub fn command(&self) -> GripCommand {
        GripCommand {
            torque: self.applied_torque,
            stiffness: self.stiffness_scale,
        }
    }

    /// Adopts `material`'s model. Returns false, changing nothing, once a
    /// material is already active.
    pub fn latch_material(&mut self, material: Material, t: f64) -> bool {
        if self.active_material.is_some() {
            return false;
        }
        self.active_material = Some(material);
        self.event_log.push(GripEvent {
            t,
            kind: GripEventKind::ModelSwitch { material },
        });
        true
    }
}

/// One decision at time `t`.
pub fn grip_update(
    mut state: GripState,
    pred: &Prediction,
    cfg: &ControllerConfig,
    t: f64,
) -> Result<(GripState, GripCommand)> {
    if !(pred.slip_prob.is_finite()
        && pred.force_value.is_finite()
        && pred.cell.0.is_finite()
        && pred.cell.1.is_finite())
    {
        return Err(Error::NonFinite("prediction"));
    }
    let before = state.applied_torque;
    if pred.slip_prob > cfg.slip_threshold_prob {
        state.consecutive_stable = 0;
        state.applied_torque = (before + cfg.torque_step_up).min(cfg.max_torque);
        if state.applied_torque != before {
            state.event_log.push(GripEvent {
                t,
                kind: GripEventKind::TorqueUp {
                    from: before,
                    to: state.applied_torque,
                },
            });
        }
    } else {
        state.consecutive_stable += 1;
        if state.consecutive_stable > cfg.stable_steps_before_relax && before > cfg.base_torque {
            state.applied_torque = (before - cfg.relax_step).max(cfg.base_torque);
            state.event_log.push(GripEvent {
                t,
                kind: GripEventKind::Relax {
                    from: before,
                    to: state.applied_torque,
                },
            });
        }
    }
    // the share the grip itself put on each contact cell while the prediction was made
    let grip_share = grip_cell_force(TORQUE_TO_NORMAL * before * state.stiffness_scale);
    let stiffness = if pred.force_value - grip_share > cfg.inertial_stiffen_threshold {
        STIFF_SCALE
    } else {
        1.0
    };
    if stiffness != state.stiffness_scale {
        state.event_log.push(GripEvent {
            t,
            kind: if stiffness > 1.0 {
                GripEventKind::Stiffen
            } else {
                GripEventKind::Soften
            },
        });
        state.stiffness_scale = stiffness;
    }
    let cmd = state.command();
    Ok((state, cmd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(slip_prob: f64, force: f64) -> Prediction {
        Prediction {
            slip_prob,
            force_value: force,
            cell: (7.5, 7.5),
        }
    }

    #[test]
    fn slip_steps_up_and_caps() {
        let cfg = ControllerConfig::default();
        let (s, cmd) = grip_update(GripState::new(&cfg), &pred(0.9, 1.0), &cfg, 0.0).unwrap();
        assert!((cmd.torque - 0.5).abs() < 1e-12);
        let mut s = s;
        for _ in 0..20 {
            s = grip_update(s, &pred(0.9, 1.0), &cfg, 0.0).unwrap().0;
        }
        assert_eq!(s.applied_torque, 1.0);
        let (_, cmd) = grip_update(s, &pred(0.9, 1.0), &cfg, 0.0).unwrap();
        assert_eq!(cmd.torque, 1.0);
    }

    #[test]
    fn relaxes_after_the_stable_window_and_never_below_base() {
        let cfg = ControllerConfig::default();
        let mut s = GripState::new(&cfg);
        s.applied_torque = 0.45;
        for _ in 0..cfg.stable_steps_before_relax {
            s = grip_update(s, &pred(0.0, 1.0), &cfg, 0.0).unwrap().0;
        }
        assert_eq!(s.applied_torque, 0.45);
        s = grip_update(s, &pred(0.0, 1.0), &cfg, 0.0).unwrap().0;
        assert!((s.applied_torque - 0.43).abs() < 1e-12);
        for _ in 0..10 {
            s = grip_update(s, &pred(0.0, 1.0), &cfg, 0.0).unwrap().0;
        }
        assert_eq!(s.applied_torque, 0.4);
    }

    #[test]
    fn stiffness_follows_predicted_force() {
        let cfg = ControllerConfig::default();
        let (s, cmd) = grip_update(
            GripState::new(&cfg),
            &pred(0.0, cfg.inertial_stiffen_threshold + 0.2),
            &cfg,
            0.1,
        )
        .unwrap();
        assert_eq!(cmd.stiffness, 2.0);
        let (s, cmd) = grip_update(s, &pred(0.0, 0.0), &cfg, 0.2).unwrap();
        assert_eq!(cmd.stiffness, 1.0);
        assert_eq!(s.event_log.len(), 2);
    }

    #[test]
    fn stiffening_ignores_the_grips_own_force() {
        let cfg = ControllerConfig::default();
        let mut s = GripState::new(&cfg);
        s.applied_torque = 1.0;
        // a 1 Nm grip alone puts 25/84 N on every contact cell
        let own = 25.0 / 84.0;
        let (s, cmd) = grip_update(s, &pred(0.0, own + 0.1), &cfg, 0.0).unwrap();
        assert_eq!(cmd.stiffness, 1.0);
        let (s, cmd) = grip_update(s, &pred(0.0, own + 0.35), &cfg, 0.0).unwrap();
        assert_eq!(cmd.stiffness, 2.0);
        // stiff joints double the grip's share, so the same excess keeps them stiff
        let (_, cmd) = grip_update(s, &pred(0.0, 2.0 * own + 0.35), &cfg, 0.0).unwrap();
        assert_eq!(cmd.stiffness, 2.0);
    }

    #[test]
    fn latch_is_one_way() {
        let cfg = ControllerConfig::default();
        let mut s = GripState::new(&cfg);
        assert!(s.latch_material(Material::Rice, 1.0));
        assert!(!s.latch_material(Material::Empty, 1.25));
        assert_eq!(s.active_material, Some(Material::Rice));
    }

    #[test]
    fn rejects_non_finite_predictions() {
        let cfg = ControllerConfig::default();
        assert!(grip_update(GripState::new(&cfg), &pred(f64::NAN, 0.0), &cfg, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn torque_is_monotone_in_slip_prob_and_bounded(
            torque in 0.4f64..=1.0,
            stable in 0usize..40,
            p1 in 0.0f64..=1.0,
            p2 in 0.0f64..=1.0,
            force in 0.0f64..20.0,
        ) {
            let cfg = ControllerConfig::default();
            let mut s = GripState::new(&cfg);
            s.applied_torque = torque;
            s.consecutive_stable = stable;
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let (_, a) = grip_update(s.clone(), &pred(lo, force), &cfg, 0.0).unwrap();
            let (_, b) = grip_update(s, &pred(hi, force), &cfg, 0.0).unwrap();
            prop_assert!(a.torque <= b.torque);
            for c in [a, b] {
                prop_assert!((0.4..=1.0).contains(&c.torque));
                prop_assert!(c.stiffness == 1.0 || c.stiffness == 2.0);
            }
        }
    }
}
