//! Tactile grid and joint-state rendering.

use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tactile::TactileGrid;
use crate::{GRID_COLS, GRID_ROWS, NUM_JOINTS};

/// Tactile resolution, N.
pub const TACTILE_RESOLUTION: f64 = 1e-4;
/// Joint encoder resolution, rad.
pub const ANGLE_RESOLUTION: f64 = 1e-5;
/// Joint torque sensing resolution, Nm.
pub const TORQUE_RESOLUTION: f64 = 1e-4;

/// Width of the inertial-load blob, cells.
const BLOB_SIGMA: f64 = 1.5;
const BLOB_RADIUS: f64 = 3.0;
/// How far the blob can move from the grid centre, cells.
const BLOB_TRAVEL: f64 = 4.0;
/// Acceleration at which the blob has moved tanh(1) of its travel, m/s².
const BLOB_ACCEL_SCALE: f64 = 10.0;
/// Blob column shift per metre of contents offset.
const CONTENTS_SHIFT: f64 = 40.0;

/// Per-link joint parameters (proximal to distal).
const BASE_POSTURE: [f64; 4] = [0.10, 0.60, 0.70, 0.50];
/// rad of joint deflection per metre of slip.
pub const SLIP_COUPLING: [f64; 4] = [2.0, 6.0, 8.0, 10.0];
/// rad per N of load carried, before stiffness.
const ELASTIC_COMPLIANCE: f64 = 0.004;
const ANGLE_NOISE: f64 = 2e-4;
/// Closing of the fingers once the container is gone, rad.
const DROP_CLOSURE: f64 = 0.35;
const TORQUE_SHARE: [f64; 4] = [0.6, 1.0, 0.9, 0.7];
const LOAD_TORQUE: f64 = 0.01;

fn quantize(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn in_contact(r: usize, c: usize) -> bool {
    let palm = (8..=13).contains(&r) && (3..=12).contains(&c);
    let pads = (1..=2).contains(&r)
        && ((1..=3).contains(&c) || (6..=9).contains(&c) || (12..=14).contains(&c));
    let thumb = (5..=6).contains(&r) && c <= 1;
    palm || pads || thumb
}

/// Normalised weights of the power-grasp contact pattern.
fn contact_weights() -> &'static [f64] {
    static W: OnceLock<Vec<f64>> = OnceLock::new();
    W.get_or_init(|| {
        let mut w = vec![0.0; GRID_ROWS * GRID_COLS];
        for r in 0..GRID_ROWS {
            for c in 0..GRID_COLS {
                if in_contact(r, c) {
                    w[r * GRID_COLS + c] = 1.0;
                }
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    })
}

/// Force on each contact cell from a grip normal force `normal`, N.
pub fn grip_cell_force(normal: f64) -> f64 {
    normal * contact_weights().iter().fold(0.0, |a: f64, &w| a.max(w))
}

/// Where the inertial load concentrates on the grid.
pub fn blob_center(felt_accel: f64, tilt: f64, contents_offset: f64) -> (f64, f64) {
    let mid_r = (GRID_ROWS as f64 - 1.0) / 2.0;
    let mid_c = (GRID_COLS as f64 - 1.0) / 2.0;
    let row = mid_r + BLOB_TRAVEL * (felt_accel / BLOB_ACCEL_SCALE).tanh();
    let col =
        mid_c + BLOB_TRAVEL * tilt.sin() + (CONTENTS_SHIFT * contents_offset).clamp(-2.0, 2.0);
    (row, col)
}

/// Grid whose cells sum to `normal + load` (before quantisation).
pub fn render_grid(normal: f64, load: f64, center: (f64, f64)) -> TactileGrid {
    let mut grid = TactileGrid::zeros();
    if normal > 0.0 {
        for (cell, w) in grid.cells_mut().iter_mut().zip(contact_weights()) {
            *cell += normal * w;
        }
    }
    if load > 0.0 {
        let mut blob = vec![0.0; GRID_ROWS * GRID_COLS];
        let mut total = 0.0;
        for r in 0..GRID_ROWS {
            for c in 0..GRID_COLS {
                let dr = r as f64 - center.0;
                let dc = c as f64 - center.1;
                let d2 = dr * dr + dc * dc;
                if d2 <= BLOB_RADIUS * BLOB_RADIUS {
                    let w = (-d2 / (2.0 * BLOB_SIGMA * BLOB_SIGMA)).exp();
                    blob[r * GRID_COLS + c] = w;
                    total += w;
                }
            }
        }
        for (cell, w) in grid.cells_mut().iter_mut().zip(&blob) {
            *cell += load * w / total;
        }
    }
    for cell in grid.cells_mut() {
        *cell = quantize(*cell, TACTILE_RESOLUTION).max(0.0);
    }
    grid
}

pub struct JointReading {
    pub angles: [f64; NUM_JOINTS],
    pub torques: [f64; NUM_JOINTS],
}

pub fn render_joints(
    rng: &mut ChaCha8Rng,
    slip: f64,
    load: f64,
    grip_torque: f64,
    stiffness: f64,
    dropped: bool,
) -> JointReading {
    let noise = Normal::new(0.0, ANGLE_NOISE).expect("valid noise std");
    let mut angles = [0.0; NUM_JOINTS];
    let mut torques = [0.0; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        let finger = j / 4;
        let link = j % 4;
        let mut a = BASE_POSTURE[link] + 0.05 * finger as f64 + SLIP_COUPLING[link] * slip;
        let mut tq = grip_torque * stiffness * TORQUE_SHARE[link];
        if dropped {
            a += DROP_CLOSURE;
        } else {
            a += ELASTIC_COMPLIANCE * load / stiffness;
            tq += LOAD_TORQUE * load;
        }
        a += noise.sample(rng);
        angles[j] = quantize(a, ANGLE_RESOLUTION);
        torques[j] = quantize(tq, TORQUE_RESOLUTION);
    }
    JointReading { angles, torques }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_conserves_force() {
        for (normal, load) in [(10.0, 3.0), (4.0, 0.2), (25.0, 12.0), (0.0, 1.0)] {
            for center in [(7.5, 7.5), (11.5, 3.5), (3.5, 11.5), (0.0, 15.0)] {
                let g = render_grid(normal, load, center);
                let sum: f64 = g.cells().iter().sum();
                assert!(
                    (sum - (normal + load)).abs() <= 0.01 * (normal + load),
                    "{sum} vs {}",
                    normal + load
                );
            }
        }
    }

    #[test]
    fn blob_moves_with_acceleration() {
        let (r_up, _) = blob_center(10.0, 0.0, 0.0);
        let (r_down, _) = blob_center(-10.0, 0.0, 0.0);
        assert!(r_up > 7.5 && r_down < 7.5);
        let (_, c) = blob_center(0.0, 0.5, 0.0);
        assert!(c > 7.5);
    }

    #[test]
    fn contact_pattern_is_normalised() {
        let total: f64 = contact_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
