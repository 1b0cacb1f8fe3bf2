//! Parametric motion profiles: vertical shaking and sinusoidal rotation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SIM_DT};

/// Distance from the wrist axis to the grasp point, m. Converts angular
/// acceleration of a rotation into linear acceleration along the slip axis.
pub const ROTATION_LEVER_M: f64 = 0.10;

/// Highest shake frequency; keeps at least 25 samples per period at the sim step.
pub const MAX_SHAKE_HZ: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Shaking,
    Rotation,
}

impl MotionKind {
    /// Fixed ordering, also used for tie-breaks.
    pub const ALL: [MotionKind; 2] = [MotionKind::Shaking, MotionKind::Rotation];

    pub fn name(self) -> &'static str {
        match self {
            MotionKind::Shaking => "shaking",
            MotionKind::Rotation => "rotation",
        }
    }
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shaking" => Ok(MotionKind::Shaking),
            "rotation" => Ok(MotionKind::Rotation),
            _ => Err(Error::invalid(format!("unknown motion {s:?}"))),
        }
    }
}

/// Parameters that regenerate a profile exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MotionSpec {
    Shaking {
        shake_count: u32,
        peak_accel: f64,
        freq_hz: f64,
    },
    Rotation {
        range_rad: f64,
        freq_hz: f64,
        duration_s: f64,
    },
}

impl MotionSpec {
    pub fn kind(&self) -> MotionKind {
        match self {
            MotionSpec::Shaking { .. } => MotionKind::Shaking,
            MotionSpec::Rotation { .. } => MotionKind::Rotation,
        }
    }

    pub fn profile(&self) -> Result<MotionProfile> {
        match *self {
            MotionSpec::Shaking {
                shake_count,
                peak_accel,
                freq_hz,
            } => shaking_profile(shake_count, peak_accel, freq_hz),
            MotionSpec::Rotation {
                range_rad,
                freq_hz,
                duration_s,
            } => rotation_profile(range_rad, freq_hz, duration_s),
        }
    }
}

/// What the profile asks of the hand at one sim step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotionDrive {
    /// Acceleration along the grasp's slip axis, m/s² (up is positive).
    pub accel: f64,
    /// Container tilt from vertical, rad.
    pub tilt: f64,
    /// rad/s
    pub tilt_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionProfile {
    pub kind: MotionKind,
    pub duration: f64,
    pub dt: f64,
    /// Target acceleration (shaking, m/s²) or orientation (rotation, rad) per step.
    pub samples: Vec<f64>,
    /// Number of shakes; zero for rotations.
    pub shake_count: u32,
    /// Peak acceleration (shaking) or orientation range (rotation).
    pub amplitude: f64,
    pub frequency: f64,
}

impl MotionProfile {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn drive(&self, i: usize) -> MotionDrive {
        let Some(&sample) = self.samples.get(i) else {
            return MotionDrive::default();
        };
        match self.kind {
            MotionKind::Shaking => MotionDrive {
                accel: sample,
                tilt: 0.0,
                tilt_rate: 0.0,
            },
            MotionKind::Rotation => {
                let w = 2.0 * PI * self.frequency;
                let t = i as f64 * self.dt;
                MotionDrive {
                    accel: -ROTATION_LEVER_M * self.amplitude * w * w * (w * t).sin(),
                    tilt: sample,
                    tilt_rate: self.amplitude * w * (w * t).cos(),
                }
            }
        }
    }

    /// Largest velocity reached when integrating the acceleration samples.
    pub fn peak_velocity(&self) -> f64 {
        let mut v = 0.0f64;
        let mut peak = 0.0f64;
        for i in 0..self.len() {
            v += self.drive(i).accel * self.dt;
            peak = peak.max(v.abs());
        }
        peak
    }
}

/// `shake_count` raised-cosine velocity pulses: the acceleration is one sine
/// period per shake, mean-corrected so the sampled profile returns exactly to
/// rest and rescaled so its largest sample is `peak_accel`.
pub fn shaking_profile(shake_count: u32, peak_accel: f64, freq_hz: f64) -> Result<MotionProfile> {
    if shake_count == 0 {
        return Err(Error::invalid("shake_count must be at least 1"));
    }
    if !(peak_accel.is_finite() && peak_accel > 0.0) {
        return Err(Error::invalid("peak_accel must be positive"));
    }
    if !(freq_hz.is_finite() && freq_hz > 0.0 && freq_hz <= MAX_SHAKE_HZ) {
        return Err(Error::invalid(format!(
            "shake frequency must be in (0, {MAX_SHAKE_HZ}] Hz"
        )));
    }
    let dt = SIM_DT;
    let duration = f64::from(shake_count) / freq_hz;
    let n = (duration / dt).round() as usize;
    let w = 2.0 * PI * freq_hz;
    let mut samples: Vec<f64> = (0..n).map(|i| (w * i as f64 * dt).sin()).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    samples.iter_mut().for_each(|s| *s -= mean);
    let max = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    samples.iter_mut().for_each(|s| *s *= peak_accel / max);
    Ok(MotionProfile {
        kind: MotionKind::Shaking,
        duration,
        dt,
        samples,
        shake_count,
        amplitude: peak_accel,
        frequency: freq_hz,
    })
}

/// orientation(t) = range·sin(2π·freq·t), sampled at the sim step including t = duration.
pub fn rotation_profile(range_rad: f64, freq_hz: f64, duration_s: f64) -> Result<MotionProfile> {
    if !(range_rad.is_finite() && range_rad > 0.0 && range_rad <= FRAC_PI_2) {
        return Err(Error::invalid("rotation range must be in (0, pi/2] rad"));
    }
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::invalid("rotation frequency must be positive"));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid("rotation duration must be positive"));
    }
    let dt = SIM_DT;
    let n = (duration_s / dt).round() as usize;
    let w = 2.0 * PI * freq_hz;
    let samples = (0..=n)
        .map(|i| range_rad * (w * i as f64 * dt).sin())
        .collect();
    Ok(MotionProfile {
        kind: MotionKind::Rotation,
        duration: duration_s,
        dt,
        samples,
        shake_count: 0,
        amplitude: range_rad,
        frequency: freq_hz,
    })
}
