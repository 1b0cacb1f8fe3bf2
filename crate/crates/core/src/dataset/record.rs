use crate::controller::motion::MotionSpec;
use crate::dsp::{crop_to_motion, Waveform};
use crate::tactile::TactileFrame;
use crate::{Error, Material, Result, SIM_DT};

/// Simulator ground truth for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepTruth {
    pub slip: bool,
    /// N
    pub max_force: f64,
    pub max_cell: (usize, usize),
    pub dropped: bool,
    /// m
    pub slip_displacement: f64,
}

/// One manipulation trial with synchronized streams and ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial_id: String,
    pub material: Material,
    pub motion: MotionSpec,
    pub seed: u64,
    /// Mean commanded grip torque, Nm.
    pub grip_torque: f64,
    pub motion_start_s: f64,
    pub motion_end_s: f64,
    pub audio: Waveform,
    pub tactile: Vec<TactileFrame>,
    pub truth: Vec<StepTruth>,
}

impl TrialRecord {
    pub fn steps(&self) -> usize {
        self.tactile.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trial_id.is_empty() {
            return Err(Error::invalid("trial id is empty"));
        }
        if self.tactile.len() != self.truth.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tactile frames but {} truth rows",
                self.tactile.len(),
                self.truth.len()
            )));
        }
        let audio_s = self.audio.duration();
        let tactile_s = self.tactile.len() as f64 * SIM_DT;
        if (audio_s - tactile_s).abs() > SIM_DT + 1e-9 {
            return Err(Error::ShapeMismatch(format!(
                "audio lasts {audio_s} s, tactile {tactile_s} s"
            )));
        }
        if !(0.0 <= self.motion_start_s
            && self.motion_start_s < self.motion_end_s
            && self.motion_end_s <= tactile_s + 1e-9)
        {
            return Err(Error::invalid("motion window outside the trial"));
        }
        for f in &self.tactile {
            f.validate()?;
        }
        if self.tactile.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::invalid("tactile timestamps must strictly increase"));
        }
        Ok(())
    }

    pub fn first_drop_step(&self) -> Option<usize> {
        self.truth.iter().position(|s| s.dropped)
    }

    /// End of the usable motion span: the motion end, or the drop if earlier.
    pub fn usable_motion_end_s(&self) -> f64 {
        match self.first_drop_step() {
            Some(step) => self.motion_end_s.min(step as f64 * SIM_DT),
            None => self.motion_end_s,
        }
    }

    /// Audio of the motion span before any drop; `None` when that is empty.
    pub fn motion_audio(&self) -> Result<Option<Waveform>> {
        let end = self.usable_motion_end_s().min(self.audio.duration());
        if end <= self.motion_start_s {
            return Ok(None);
        }
        crop_to_motion(&self.audio, self.motion_start_s, end).map(Some)
    }

    pub fn joint_history(&self) -> Vec<[f64; crate::NUM_JOINTS]> {
        self.tactile.iter().map(|f| f.joint_angles).collect()
    }
}
