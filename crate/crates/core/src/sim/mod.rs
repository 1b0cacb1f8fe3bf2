//! Deterministic simulator of a hand holding an opaque container.
//!
//! The grasp is a one-degree-of-freedom Coulomb contact along the container's
//! long axis. The commanded grip torque maps linearly onto normal force
//! (`N = k·τ·stiffness`, k = 25 N/Nm); available friction is `μ·N`. The load
//! the hand must carry is the bottle's weight and inertia plus the force
//! transmitted by the contents, which slosh as a damped oscillator. Whenever
//! the load exceeds the available friction the container slides at a speed
//! proportional to the deficit:
//!
//! ```text
//! d(slip)/dt = SLIP_RATE · max(0, load − μ·N)
//! ```
//!
//! With no grip and no motion the deficit is the weight `m·g`, so the fall
//! time to [`DROP_THRESHOLD`] is `DROP_THRESHOLD / (SLIP_RATE·m·g)`; for the
//! lightest container (0.1 kg) that is 0.85 s.

pub mod audio;
pub mod material;
pub mod render;
pub mod trial;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tactile::TactileGrid;
use crate::{Error, Result, NUM_JOINTS, SAMPLE_RATE};
use material::MaterialParams;

pub use render::grip_cell_force;
pub use trial::{run_trial, run_trial_with, FixedGrip, GripCommand, GripPolicy, TrialSetup};

pub const GRAVITY: f64 = 9.81;
/// Coulomb friction coefficient between hand and bottle.
pub const FRICTION_COEFF: f64 = 0.4;
/// Normal force per unit grip torque, N/Nm.
pub const TORQUE_TO_NORMAL: f64 = 25.0;
/// Slip speed per newton of friction deficit, m/(N·s).
pub const SLIP_RATE: f64 = 0.06;
/// Slip beyond which the container is considered dropped, m.
pub const DROP_THRESHOLD: f64 = 0.05;
/// Largest accepted step, s.
pub const MAX_DT: f64 = 0.02;
pub const MAX_GRIP_TORQUE: f64 = 1.0;
/// Excitation added per rad/s of tilt rate when computing impact rates, m/s² per rad/s.
const TILT_EXCITATION: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pose {
    /// Vertical position, m.
    pub height: f64,
    /// Tilt from vertical, rad.
    pub angle: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Twist {
    /// m/s
    pub vertical: f64,
    /// rad/s
    pub angular: f64,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub time: f64,
    pub container_pose: Pose,
    pub container_velocity: Twist,
    /// Displacement of the contents relative to the bottle, m.
    pub contents_offset: f64,
    pub contents_velocity: f64,
    /// Normal force from the last step, N.
    pub grip_normal_force: f64,
    /// Accumulated container motion relative to the hand, m. Never decreases.
    pub slip_displacement: f64,
    pub dropped: bool,
    rng: ChaCha8Rng,
    /// Audio not yet emitted, starting at the next chunk.
    pending_audio: Vec<f64>,
}

impl SimState {
    pub fn new(seed: u64) -> Self {
        SimState {
            time: 0.0,
            container_pose: Pose::default(),
            container_velocity: Twist::default(),
            contents_offset: 0.0,
            contents_velocity: 0.0,
            grip_normal_force: 0.0,
            slip_displacement: 0.0,
            dropped: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending_audio: Vec::new(),
        }
    }
}

/// Actuation for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimInput {
    /// Acceleration along the slip axis, m/s².
    pub accel: f64,
    pub tilt: f64,
    pub tilt_rate: f64,
    /// Nm, in [0, 1].
    pub grip_torque: f64,
    /// Scales the torque-to-normal map, in [1, 2].
    pub stiffness: f64,
}

impl SimInput {
    pub fn hold(grip_torque: f64) -> Self {
        SimInput {
            accel: 0.0,
            tilt: 0.0,
            tilt_rate: 0.0,
            grip_torque,
            stiffness: 1.0,
        }
    }

    fn validate(&self, dt: f64) -> Result<()> {
        let finite = [
            self.accel,
            self.tilt,
            self.tilt_rate,
            self.grip_torque,
            self.stiffness,
            dt,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("simulator input"));
        }
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::invalid(format!("dt {dt} outside (0, {MAX_DT}]")));
        }
        if !(0.0..=MAX_GRIP_TORQUE).contains(&self.grip_torque) {
            return Err(Error::invalid(format!(
                "grip torque {} outside [0, 1] Nm",
                self.grip_torque
            )));
        }
        if !(1.0..=2.0).contains(&self.stiffness) {
            return Err(Error::invalid(format!(
                "stiffness {} outside [1, 2]",
                self.stiffness
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimObservation {
    /// Time at the end of the step, s.
    pub t: f64,
    pub tactile_grid: TactileGrid,
    pub joint_angles: [f64; NUM_JOINTS],
    pub joint_torques: [f64; NUM_JOINTS],
    pub audio_chunk: Vec<f64>,
    pub true_slip: bool,
    pub true_max_force: f64,
    pub true_max_force_cell: (usize, usize),
    pub slip_displacement: f64,
    pub dropped: bool,
    /// Particle impacts started during the step.
    pub impacts: u32,
    pub grip_normal_force: f64,
    /// Magnitude of the load friction must carry, N; still reported on and
    /// after the step that drops the container.
    pub inertial_load: f64,
    /// μ·N, N.
    pub available_friction: f64,
}

/// Pure form of [`advance`]: returns the successor state and the observation.
pub fn step(
    state: &SimState,
    material: &MaterialParams,
    input: &SimInput,
    dt: f64,
) -> Result<(SimState, SimObservation)> {
    let mut next = state.clone();
    let obs = advance(&mut next, material, input, dt)?;
    Ok((next, obs))
}

/// Steps the simulation in place.
pub fn advance(
    state: &mut SimState,
    material: &MaterialParams,
    input: &SimInput,
    dt: f64,
) -> Result<SimObservation> {
    input.validate(dt)?;
    let chunk_len = (dt * f64::from(SAMPLE_RATE)).round() as usize;

    state.container_velocity.vertical += input.accel * dt;
    state.container_pose.height += state.container_velocity.vertical * dt;
    state.container_pose.angle = input.tilt;
    state.container_velocity.angular = input.tilt_rate;

    let g_axis = GRAVITY * input.tilt.cos();
    let contents_force = if material.contents_mass > 0.0 {
        let w = 2.0 * std::f64::consts::PI * material.slosh_hz;
        let rel_acc = -input.accel
            - 2.0 * material.slosh_damping * w * state.contents_velocity
            - w * w * state.contents_offset;
        state.contents_velocity += rel_acc * dt;
        state.contents_offset += state.contents_velocity * dt;
        material.contents_mass * (g_axis + input.accel + rel_acc)
    } else {
        0.0
    };
    let signed_load = material.bottle_mass() * (g_axis + input.accel) + contents_force;
    let required = signed_load.abs();

    let mut true_slip = false;
    let (normal, available) = if state.dropped {
        (0.0, 0.0)
    } else {
        let normal = TORQUE_TO_NORMAL * input.grip_torque * input.stiffness;
        let available = FRICTION_COEFF * normal;
        if required > available {
            state.slip_displacement += SLIP_RATE * (required - available) * dt;
            true_slip = true;
            if state.slip_displacement >= DROP_THRESHOLD {
                state.dropped = true;
            }
        }
        (normal, available)
    };
    state.grip_normal_force = normal;

    let carrying = !state.dropped;
    let excitation = input.accel.abs() + TILT_EXCITATION * input.tilt_rate.abs();
    let impacts = if carrying {
        audio::emit_impacts(
            &mut state.rng,
            material,
            excitation,
            chunk_len,
            dt,
            &mut state.pending_audio,
        )
    } else {
        state.pending_audio.clear();
        0
    };
    let audio_chunk = audio::take_chunk(&mut state.rng, &mut state.pending_audio, chunk_len);

    let (grid_normal, grid_load) = if carrying {
        (normal, required)
    } else {
        (0.0, 0.0)
    };
    let felt_accel = signed_load / material.total_mass - g_axis;
    let center = render::blob_center(felt_accel, input.tilt, state.contents_offset);
    let tactile_grid = render::render_grid(grid_normal, grid_load, center);
    let joints = render::render_joints(
        &mut state.rng,
        state.slip_displacement,
        grid_load,
        input.grip_torque,
        input.stiffness,
        state.dropped,
    );
    let (true_max_force, true_max_force_cell) = tactile_grid.max_cell();

    state.time += dt;
    Ok(SimObservation {
        t: state.time,
        tactile_grid,
        joint_angles: joints.angles,
        joint_torques: joints.torques,
        audio_chunk,
        true_slip,
        true_max_force,
        true_max_force_cell,
        slip_displacement: state.slip_displacement,
        dropped: state.dropped,
        impacts,
        grip_normal_force: grid_normal,
        inertial_load: required,
        available_friction: available,
    })
}

/// Time for a stationary, ungripped container to slide [`DROP_THRESHOLD`].
pub fn free_fall_drop_time(material: &MaterialParams) -> f64 {
    DROP_THRESHOLD / (SLIP_RATE * material.total_mass * GRAVITY)
}

#[cfg(test)]
mod tests {
    use super::material::Material;
    use super::*;
    use crate::SIM_DT;

    fn run_hold(
        material: Material,
        input: SimInput,
        steps: usize,
        seed: u64,
    ) -> Vec<SimObservation> {
        let params = material.params();
        let mut state = SimState::new(seed);
        (0..steps)
            .map(|_| advance(&mut state, &params, &input, SIM_DT).unwrap())
            .collect()
    }

    #[test]
    fn static_hold_at_max_grip_never_slips() {
        for m in Material::ALL {
            let obs = run_hold(m, SimInput::hold(1.0), 200, 3);
            assert!(obs
                .iter()
                .all(|o| !o.true_slip && o.slip_displacement == 0.0));
        }
    }

    #[test]
    fn zero_grip_drops_within_closed_form_time() {
        for m in Material::ALL {
            let params = m.params();
            let t_drop = free_fall_drop_time(&params);
            assert!(t_drop < 1.0, "{m}: {t_drop}");
            let obs = run_hold(m, SimInput::hold(0.0), 200, 9);
            let first = obs
                .iter()
                .position(|o| o.dropped)
                .expect("dropped within 1 s");
            let expected = (t_drop / SIM_DT).ceil() as usize;
            // slip starts accruing on the first step; index is step count minus one
            assert!(
                (first + 1).abs_diff(expected) <= 1,
                "{m}: step {} vs {}",
                first + 1,
                expected
            );
        }
    }

    #[test]
    fn dropped_is_absorbing() {
        let obs = run_hold(Material::Rice, SimInput::hold(0.0), 150, 4);
        let first = obs.iter().position(|o| o.dropped).unwrap();
        assert!(obs[first..].iter().all(|o| o.dropped));
        let slips: Vec<f64> = obs.iter().map(|o| o.slip_displacement).collect();
        assert!(slips.windows(2).all(|w| w[1] >= w[0]));
        assert!(obs[first].slip_displacement >= DROP_THRESHOLD);
    }

    #[test]
    fn empty_container_audio_is_noise_floor() {
        let input = SimInput {
            accel: 25.0,
            tilt_rate: 3.0,
            ..SimInput::hold(1.0)
        };
        let obs = run_hold(Material::Empty, input, 100, 5);
        assert!(obs.iter().all(|o| o.impacts == 0));
        let samples: Vec<f64> = obs
            .iter()
            .flat_map(|o| o.audio_chunk.iter().copied())
            .collect();
        let rms = (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt();
        assert!(rms < 2.0 * audio::NOISE_FLOOR, "rms {rms}");
    }

    #[test]
    fn chunk_length_matches_step() {
        let obs = run_hold(Material::Rice, SimInput::hold(0.4), 3, 1);
        assert!(obs.iter().all(|o| o.audio_chunk.len() == 80));
        let params = Material::Rice.params();
        let o = advance(&mut SimState::new(0), &params, &SimInput::hold(0.4), 0.01).unwrap();
        assert_eq!(o.audio_chunk.len(), 160);
    }

    #[test]
    fn rejects_invalid_input() {
        let params = Material::Rice.params();
        let s = SimState::new(0);
        assert!(step(&s, &params, &SimInput::hold(f64::NAN), SIM_DT).is_err());
        assert!(step(&s, &params, &SimInput::hold(1.5), SIM_DT).is_err());
        assert!(step(&s, &params, &SimInput::hold(-0.1), SIM_DT).is_err());
        assert!(step(&s, &params, &SimInput::hold(0.4), 0.0).is_err());
        assert!(step(&s, &params, &SimInput::hold(0.4), 0.03).is_err());
        let bad = SimInput {
            accel: f64::INFINITY,
            ..SimInput::hold(0.4)
        };
        assert!(step(&s, &params, &bad, SIM_DT).is_err());
    }

    #[test]
    fn step_is_pure() {
        let params = Material::Cereal.params();
        let s = SimState::new(11);
        let input = SimInput {
            accel: 12.0,
            ..SimInput::hold(0.4)
        };
        let (_, a) = step(&s, &params, &input, SIM_DT).unwrap();
        let (_, b) = step(&s, &params, &input, SIM_DT).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tactile_sum_tracks_normal_plus_load() {
        let params = Material::Gummies.params();
        let mut s = SimState::new(2);
        for i in 0..400 {
            let input = SimInput {
                accel: 14.0 * (i as f64 * 0.06).sin(),
                tilt: 0.3 * (i as f64 * 0.02).sin(),
                ..SimInput::hold(0.7)
            };
            let o = advance(&mut s, &params, &input, SIM_DT).unwrap();
            let sum: f64 = o.tactile_grid.cells().iter().sum();
            if o.dropped {
                continue;
            }
            let expected = o.grip_normal_force + o.inertial_load;
            assert!(
                (sum - expected).abs() <= 0.01 * expected.max(1e-9),
                "step {i}: {sum} vs {expected}"
            );
            let max = o.tactile_grid.cells().iter().cloned().fold(0.0, f64::max);
            assert_eq!(o.true_max_force, max);
        }
    }
}
