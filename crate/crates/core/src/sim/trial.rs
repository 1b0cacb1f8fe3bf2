//! Whole-trial rollout: rest, motion profile, rest, under a grip policy.

use super::{advance, SimInput, SimObservation, SimState, MAX_GRIP_TORQUE};
use crate::controller::motion::MotionSpec;
use crate::dataset::{StepTruth, TrialRecord};
use crate::dsp::Waveform;
use crate::tactile::TactileFrame;
use crate::{Error, Material, Result, SAMPLE_RATE, SIM_DT};

/// Still time before and after the motion in generated trials, s.
pub const DEFAULT_REST_S: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GripCommand {
    /// Nm
    pub torque: f64,
    pub stiffness: f64,
}

impl GripCommand {
    pub fn new(torque: f64) -> Self {
        GripCommand {
            torque,
            stiffness: 1.0,
        }
    }
}

/// Decides the grip for the next step from the observation of the step just
/// taken (`None` before the first step).
pub trait GripPolicy {
    fn command(&mut self, last: Option<&SimObservation>) -> Result<GripCommand>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedGrip(pub f64);

impl FixedGrip {
    pub fn new(torque: f64) -> Result<Self> {
        if !(torque.is_finite() && (0.0..=MAX_GRIP_TORQUE).contains(&torque)) {
            return Err(Error::invalid(format!(
                "fixed grip torque {torque} outside [0, {MAX_GRIP_TORQUE}] Nm"
            )));
        }
        Ok(FixedGrip(torque))
    }
}

impl GripPolicy for FixedGrip {
    fn command(&mut self, _last: Option<&SimObservation>) -> Result<GripCommand> {
        Ok(GripCommand::new(self.0))
    }
}

impl<F> GripPolicy for F
where
    F: FnMut(Option<&SimObservation>) -> Result<GripCommand>,
{
    fn command(&mut self, last: Option<&SimObservation>) -> Result<GripCommand> {
        self(last)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSetup {
    pub trial_id: String,
    pub material: Material,
    pub motion: MotionSpec,
    pub seed: u64,
    /// Still time on each side of the motion, s.
    pub rest_s: f64,
}

impl TrialSetup {
    pub fn new(
        trial_id: impl Into<String>,
        material: Material,
        motion: MotionSpec,
        seed: u64,
    ) -> Self {
        TrialSetup {
            trial_id: trial_id.into(),
            material,
            motion,
            seed,
            rest_s: DEFAULT_REST_S,
        }
    }
}

/// Steps the simulator through rest, the motion and rest again at the sim
/// step. `observe` sees every observation as it is produced.
pub fn run_trial_with(
    setup: &TrialSetup,
    policy: &mut dyn GripPolicy,
    observe: &mut dyn FnMut(&SimObservation),
) -> Result<TrialRecord> {
    if !(setup.rest_s.is_finite() && setup.rest_s >= 0.0) {
        return Err(Error::invalid("rest time must be non-negative"));
    }
    let profile = setup.motion.profile()?;
    if profile.is_empty() {
        return Err(Error::invalid("motion profile has zero duration"));
    }
    let params = setup.material.params();
    let rest = (setup.rest_s / SIM_DT).round() as usize;
    let total = 2 * rest + profile.len();

    let mut state = SimState::new(setup.seed);
    let mut audio = Vec::with_capacity(total * (SIM_DT * f64::from(SAMPLE_RATE)).round() as usize);
    let mut tactile = Vec::with_capacity(total);
    let mut truth = Vec::with_capacity(total);
    let mut torques = Vec::with_capacity(total);
    let mut last: Option<SimObservation> = None;
    for i in 0..total {
        let cmd = policy.command(last.as_ref())?;
        let drive = if i >= rest {
            profile.drive(i - rest)
        } else {
            Default::default()
        };
        let input = SimInput {
            accel: drive.accel,
            tilt: drive.tilt,
            tilt_rate: drive.tilt_rate,
            grip_torque: cmd.torque,
            stiffness: cmd.stiffness,
        };
        let obs = advance(&mut state, &params, &input, SIM_DT)?;
        observe(&obs);
        audio.extend_from_slice(&obs.audio_chunk);
        tactile.push(TactileFrame {
            t: obs.t,
            grid: obs.tactile_grid.clone(),
            joint_angles: obs.joint_angles,
            joint_torques: obs.joint_torques,
        });
        truth.push(StepTruth {
            slip: obs.true_slip,
            max_force: obs.true_max_force,
            max_cell: obs.true_max_force_cell,
            dropped: obs.dropped,
            slip_displacement: obs.slip_displacement,
        });
        torques.push(cmd.torque);
        last = Some(obs);
    }
    let grip_torque = torques.iter().sum::<f64>() / torques.len() as f64;
    Ok(TrialRecord {
        trial_id: setup.trial_id.clone(),
        material: setup.material,
        motion: setup.motion,
        seed: setup.seed,
        grip_torque,
        motion_start_s: rest as f64 * SIM_DT,
        motion_end_s: (rest + profile.len()) as f64 * SIM_DT,
        audio: Waveform::new(audio, SAMPLE_RATE)?,
        tactile,
        truth,
    })
}

pub fn run_trial(setup: &TrialSetup, policy: &mut dyn GripPolicy) -> Result<TrialRecord> {
    run_trial_with(setup, policy, &mut |_| {})
}
