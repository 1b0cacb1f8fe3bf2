//! Closed-loop episodes: audio classification drives a one-way switch to a
//! material-specific predictor, and the active predictor drives the grip.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grip::{grip_update, ControllerConfig, GripEvent, GripState};
use super::motion::{MotionKind, MotionSpec};
use crate::dsp::MfccExtractor;
use crate::models::{argmax, MaterialClassifier, ModelRegistry, SlipPredictor};
use crate::sim::trial::run_trial_with;
use crate::sim::{FixedGrip, GripCommand, GripPolicy, SimObservation, TrialSetup};
use crate::tactile::{TactileFrame, WindowBuilder, FEATURE_DIM};
use crate::{Error, Material, Result, SIM_DT};

/// Length of the audio segment the classifier sees, s.
pub const ONLINE_SEGMENT_S: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpisodePolicy {
    Reactive,
    Fixed(f64),
}

impl FromStr for EpisodePolicy {
    type Err = Error;

    /// `reactive` or `fixed:<torque Nm>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "reactive" {
            return Ok(EpisodePolicy::Reactive);
        }
        let torque = s
            .strip_prefix("fixed:")
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown policy {s:?}; expected reactive or fixed:<torque>"
                ))
            })?
            .parse::<f64>()
            .map_err(|e| Error::invalid(format!("bad torque in {s:?}: {e}")))?;
        FixedGrip::new(torque).map(|g| EpisodePolicy::Fixed(g.0))
    }
}

impl std::fmt::Display for EpisodePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpisodePolicy::Reactive => f.write_str("reactive"),
            EpisodePolicy::Fixed(t) => write!(f, "fixed:{t:?}"),
        }
    }
}

/// A shake of 10 to 16 m/s² at 2 to 4 Hz lasting at least 3 s. Heavy
/// contents slip under the base torque at these amplitudes.
pub fn episode_motion(seed: u64) -> MotionSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::dataset::splitmix64(seed ^ 0x6570_6973));
    let freq_hz = rng.random_range(2.0f64..4.0);
    MotionSpec::Shaking {
        shake_count: (3.0 * freq_hz).ceil() as u32,
        peak_accel: rng.random_range(10.0..16.0),
        freq_hz,
    }
}

pub fn episode_setup(material: Material, motion: MotionSpec, seed: u64) -> TrialSetup {
    TrialSetup::new(
        format!("episode-{material}-{}-{seed}", motion.kind()),
        material,
        motion,
        seed,
    )
}

/// One simulator step. The command and prediction columns are what was
/// decided before the step; the truth columns are what the step produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub t: f64,
    pub torque_cmd: f64,
    pub stiffness: f64,
    pub slip_prob: Option<f64>,
    pub pred_force: Option<f64>,
    /// Force predicted by the motion's default model on the same window,
    /// recorded while a material model is active.
    pub default_pred_force: Option<f64>,
    pub true_slip: bool,
    pub true_max_force: f64,
    pub active_material: Option<Material>,
    pub dropped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub material: Material,
    pub motion: MotionKind,
    pub seed: u64,
    pub policy: EpisodePolicy,
    /// Steps ahead the predictions refer to; `None` without a predictor.
    pub horizon: Option<usize>,
    pub rows: Vec<EpisodeRow>,
    pub events: Vec<GripEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub material: Material,
    pub motion: MotionKind,
    pub seed: u64,
    pub policy: String,
    pub steps: usize,
    pub dropped: bool,
    pub mean_torque: f64,
    pub min_torque: f64,
    pub max_torque: f64,
    pub slip_steps: usize,
    pub switches: usize,
    pub switch_material: Option<Material>,
    /// Time from episode start to the model switch, s.
    pub switch_latency_s: Option<f64>,
}

pub const EPISODE_CSV_HEADER: &str =
    "t,torque_cmd,stiffness,slip_prob,pred_force,true_slip,true_max_force,active_material,dropped";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EpisodeLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(EPISODE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.torque_cmd,
                r.stiffness,
                opt(r.slip_prob),
                opt(r.pred_force),
                u8::from(r.true_slip),
                r.true_max_force,
                r.active_material.map(|m| m.to_string()).unwrap_or_default(),
                u8::from(r.dropped)
            )
            .unwrap();
        }
        out
    }

    pub fn dropped(&self) -> bool {
        self.rows.iter().any(|r| r.dropped)
    }

    pub fn mean_torque(&self) -> f64 {
        self.rows.iter().map(|r| r.torque_cmd).sum::<f64>() / self.rows.len() as f64
    }

    /// Number of changes in the active material across the rows.
    pub fn switch_count(&self) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[0].active_material != w[1].active_material)
            .count()
            + usize::from(
                self.rows
                    .first()
                    .is_some_and(|r| r.active_material.is_some()),
            )
    }

    pub fn switch_time(&self) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.active_material.is_some())
            .map(|r| r.t - SIM_DT)
    }

    pub fn switch_material(&self) -> Option<Material> {
        self.rows.iter().find_map(|r| r.active_material)
    }

    /// Absolute force errors `(active model, default model)` over the steps
    /// where a material model was active, each prediction compared with the
    /// step it refers to.
    pub fn post_switch_force_errors(&self) -> Vec<(f64, f64)> {
        let Some(h) = self.horizon else {
            return Vec::new();
        };
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let target = self.rows.get((i + h).checked_sub(1)?)?;
                if target.dropped {
                    return None;
                }
                let (p, d) = (r.pred_force?, r.default_pred_force?);
                Some((
                    (p - target.true_max_force).abs(),
                    (d - target.true_max_force).abs(),
                ))
            })
            .collect()
    }

    pub fn summary(&self) -> EpisodeSummary {
        let torques = self.rows.iter().map(|r| r.torque_cmd);
        EpisodeSummary {
            material: self.material,
            motion: self.motion,
            seed: self.seed,
            policy: self.policy.to_string(),
            steps: self.rows.len(),
            dropped: self.dropped(),
            mean_torque: self.mean_torque(),
            min_torque: torques.clone().fold(f64::INFINITY, f64::min),
            max_torque: torques.fold(f64::NEG_INFINITY, f64::max),
            slip_steps: self.rows.iter().filter(|r| r.true_slip).count(),
            switches: self.switch_count(),
            switch_material: self.switch_material(),
            switch_latency_s: self.switch_time(),
        }
    }
}

pub const SUMMARY_CSV_HEADER: &str =
    "material,motion,seed,policy,steps,dropped,mean_torque,min_torque,max_torque,slip_steps,switches,switch_material,switch_latency_s";

impl EpisodeSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.material,
            self.motion,
            self.seed,
            self.policy,
            self.steps,
            u8::from(self.dropped),
            self.mean_torque,
            self.min_torque,
            self.max_torque,
            self.slip_steps,
            self.switches,
            self.switch_material
                .map(|m| m.to_string())
                .unwrap_or_default(),
            opt(self.switch_latency_s)
        )
    }
}

struct Decision {
    cmd: GripCommand,
    slip_prob: Option<f64>,
    pred_force: Option<f64>,
    default_pred_force: Option<f64>,
    active: Option<Material>,
}

/// The reactive grip policy. Before each step it folds the previous
/// observation into its audio buffer and tactile window, possibly commits to
/// a material, predicts with the selected model and updates the grip.
pub struct ReactiveController<'a> {
    classifier: &'a MaterialClassifier,
    extractor: MfccExtractor,
    registry: &'a ModelRegistry,
    motion: MotionKind,
    cfg: ControllerConfig,
    state: Option<GripState>,
    builder: WindowBuilder,
    audio: Vec<f64>,
    segment_len: usize,
    hop_steps: usize,
    steps_seen: usize,
    decisions: Vec<Decision>,
}

impl<'a> ReactiveController<'a> {
    pub fn new(
        classifier: &'a MaterialClassifier,
        registry: &'a ModelRegistry,
        motion: MotionKind,
        cfg: ControllerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let default = registry.select_model(motion, None)?;
        let window = default.arch().window;
        for m in Material::ALL {
            if let Some(model) = registry.material_model(motion, m) {
                check_predictor(model, window)?;
            }
        }
        check_predictor(default, window)?;
        let mfcc = classifier.mfcc_config().clone();
        let segment_len = (ONLINE_SEGMENT_S * f64::from(mfcc.sample_rate)).round() as usize;
        if mfcc.frame_count(segment_len) != classifier.arch().n_frames {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {} frames, a {ONLINE_SEGMENT_S} s segment gives {}",
                classifier.arch().n_frames,
                mfcc.frame_count(segment_len)
            )));
        }
        let hop_steps = (cfg.online_hop_s / SIM_DT).round().max(1.0) as usize;
        Ok(ReactiveController {
            classifier,
            extractor: MfccExtractor::new(mfcc)?,
            registry,
            motion,
            state: Some(GripState::new(&cfg)),
            cfg,
            builder: WindowBuilder::new(window)?,
            audio: Vec::new(),
            segment_len,
            hop_steps,
            steps_seen: 0,
            decisions: Vec::new(),
        })
    }

    pub fn state(&self) -> &GripState {
        self.state
            .as_ref()
            .expect("state is only taken inside command")
    }

    fn classify_latest(&mut self, t: f64) -> Result<()> {
        let state = self.state.as_mut().expect("state present");
        if state.active_material.is_some()
            || self.audio.len() < self.segment_len
            || !self.steps_seen.is_multiple_of(self.hop_steps)
        {
            return Ok(());
        }
        let mfcc = self
            .extractor
            .compute(&self.audio[self.audio.len() - self.segment_len..])?;
        let probs = self.classifier.classify(&mfcc)?;
        let best = argmax(&probs);
        if probs[best] >= self.cfg.classifier_commit_confidence {
            let material = Material::from_index(best)
                .ok_or_else(|| Error::invalid("classifier class out of range"))?;
            state.latch_material(material, t);
            log::debug!("committed to {material} at t={t:.3} (p={:.3})", probs[best]);
        }
        Ok(())
    }
}

fn check_predictor(model: &SlipPredictor, window: usize) -> Result<()> {
    if model.arch().input_dim != FEATURE_DIM || model.arch().window != window {
        return Err(Error::ShapeMismatch(format!(
            "{} {} predictor has input {} and window {}; expected {FEATURE_DIM} and {window}",
            model.scope(),
            model.motion(),
            model.arch().input_dim,
            model.arch().window
        )));
    }
    Ok(())
}

impl GripPolicy for ReactiveController<'_> {
    fn command(&mut self, last: Option<&SimObservation>) -> Result<GripCommand> {
        let mut decision = Decision {
            cmd: self.state().command(),
            slip_prob: None,
            pred_force: None,
            default_pred_force: None,
            active: self.state().active_material,
        };
        if let Some(obs) = last {
            self.steps_seen += 1;
            self.audio.extend_from_slice(&obs.audio_chunk);
            let window = self.builder.push(&TactileFrame {
                t: obs.t,
                grid: obs.tactile_grid.clone(),
                joint_angles: obs.joint_angles,
                joint_torques: obs.joint_torques,
            })?;
            self.classify_latest(obs.t)?;
            let active = self.state().active_material;
            decision.active = active;
            if let Some(window) = window {
                let model = self.registry.select_model(self.motion, active)?;
                let pred = model.predict(&window)?;
                if model.scope() != crate::models::Scope::Default {
                    let default = self.registry.select_model(self.motion, None)?;
                    decision.default_pred_force = Some(default.predict(&window)?.force_value);
                }
                let state = self.state.take().expect("state present");
                let (state, cmd) = grip_update(state, &pred, &self.cfg, obs.t)?;
                self.state = Some(state);
                decision.cmd = cmd;
                decision.slip_prob = Some(pred.slip_prob);
                decision.pred_force = Some(pred.force_value);
            }
        }
        let cmd = decision.cmd;
        self.decisions.push(decision);
        Ok(cmd)
    }
}

struct StepTruthView {
    t: f64,
    slip: bool,
    max_force: f64,
    dropped: bool,
}

fn observe_into(truths: &mut Vec<StepTruthView>) -> impl FnMut(&SimObservation) + '_ {
    move |obs| {
        truths.push(StepTruthView {
            t: obs.t,
            slip: obs.true_slip,
            max_force: obs.true_max_force,
            dropped: obs.dropped,
        })
    }
}

/// Runs one closed-loop episode with the reactive controller.
pub fn run_reactive_loop(
    setup: &TrialSetup,
    classifier: &MaterialClassifier,
    registry: &ModelRegistry,
    cfg: &ControllerConfig,
) -> Result<EpisodeLog> {
    let motion = setup.motion.kind();
    let mut ctrl = ReactiveController::new(classifier, registry, motion, cfg.clone())?;
    let mut truths = Vec::new();
    run_trial_with(setup, &mut ctrl, &mut observe_into(&mut truths))?;
    let horizon = registry.select_model(motion, None)?.arch().horizon;
    let rows = ctrl
        .decisions
        .iter()
        .zip(&truths)
        .map(|(d, s)| EpisodeRow {
            t: s.t,
            torque_cmd: d.cmd.torque,
            stiffness: d.cmd.stiffness,
            slip_prob: d.slip_prob,
            pred_force: d.pred_force,
            default_pred_force: d.default_pred_force,
            true_slip: s.slip,
            true_max_force: s.max_force,
            active_material: d.active,
            dropped: s.dropped,
        })
        .collect();
    Ok(EpisodeLog {
        material: setup.material,
        motion,
        seed: setup.seed,
        policy: EpisodePolicy::Reactive,
        horizon: Some(horizon),
        rows,
        events: ctrl.state().event_log.clone(),
    })
}

/// Runs one episode at a constant grip torque.
pub fn run_fixed_episode(setup: &TrialSetup, torque: f64) -> Result<EpisodeLog> {
    let mut grip = FixedGrip::new(torque)?;
    let mut truths = Vec::new();
    run_trial_with(setup, &mut grip, &mut observe_into(&mut truths))?;
    let rows = truths
        .iter()
        .map(|s| EpisodeRow {
            t: s.t,
            torque_cmd: torque,
            stiffness: 1.0,
            slip_prob: None,
            pred_force: None,
            default_pred_force: None,
            true_slip: s.slip,
            true_max_force: s.max_force,
            active_material: None,
            dropped: s.dropped,
        })
        .collect();
    Ok(EpisodeLog {
        material: setup.material,
        motion: setup.motion.kind(),
        seed: setup.seed,
        policy: EpisodePolicy::Fixed(torque),
        horizon: None,
        rows,
        events: Vec::new(),
    })
}

pub fn run_episode(
    setup: &TrialSetup,
    policy: EpisodePolicy,
    models: Option<(&MaterialClassifier, &ModelRegistry)>,
    cfg: &ControllerConfig,
) -> Result<EpisodeLog> {
    match (policy, models) {
        (EpisodePolicy::Fixed(t), _) => run_fixed_episode(setup, t),
        (EpisodePolicy::Reactive, Some((c, r))) => run_reactive_loop(setup, c, r, cfg),
        (EpisodePolicy::Reactive, None) => Err(Error::invalid(
            "the reactive policy needs a classifier and predictors",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "reactive".parse::<EpisodePolicy>().unwrap(),
            EpisodePolicy::Reactive
        );
        assert_eq!(
            "fixed:1.0".parse::<EpisodePolicy>().unwrap(),
            EpisodePolicy::Fixed(1.0)
        );
        assert!("fixed:1.5".parse::<EpisodePolicy>().is_err());
        assert!("fixed:".parse::<EpisodePolicy>().is_err());
        assert!("gentle".parse::<EpisodePolicy>().is_err());
    }

    #[test]
    fn fixed_episode_commands_constant_torque() {
        let setup = episode_setup(Material::Rice, episode_motion(3), 3);
        let log = run_fixed_episode(&setup, 1.0).unwrap();
        assert!(log.rows.iter().all(|r| r.torque_cmd == 1.0));
        assert!(!log.dropped());
        let csv = log.to_csv();
        assert!(csv.starts_with(EPISODE_CSV_HEADER));
        assert_eq!(csv.lines().count(), log.rows.len() + 1);
    }

    #[test]
    fn episode_motion_slips_heavy_contents_at_base_torque() {
        let setup = episode_setup(Material::Rice, episode_motion(11), 11);
        let log = run_fixed_episode(&setup, 0.4).unwrap();
        assert!(log.summary().slip_steps > 0);
    }
}
