//! Haptic features from the tactile grid and joint streams.

mod features;
mod slip;

pub use features::{
    center_of_mass, com_gradient, feature_vector, make_windows, nonzero_stats, FeatureVector,
    FeatureWindow, WindowBuilder, FEATURE_DIM,
};
pub use slip::{
    calibrate_slip_threshold, f1_score, label_slip, DEFAULT_SLIP_HORIZON, DEFAULT_SLIP_THRESHOLD,
};

use crate::{Error, Result, GRID_CELLS, GRID_COLS, GRID_ROWS, NUM_JOINTS};

/// 16×16 pressure map, N per cell, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TactileGrid([f64; GRID_CELLS]);

impl TactileGrid {
    pub fn zeros() -> Self {
        TactileGrid([0.0; GRID_CELLS])
    }

    pub fn from_cells(cells: &[f64]) -> Result<Self> {
        if cells.len() != GRID_CELLS {
            return Err(Error::ShapeMismatch(format!(
                "tactile grid needs {GRID_CELLS} cells, got {}",
                cells.len()
            )));
        }
        if cells.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("tactile grid"));
        }
        if cells.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("tactile pressures must be non-negative"));
        }
        let mut grid = [0.0; GRID_CELLS];
        grid.copy_from_slice(cells);
        Ok(TactileGrid(grid))
    }

    pub fn cells(&self) -> &[f64; GRID_CELLS] {
        &self.0
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [f64; GRID_CELLS] {
        &mut self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row * GRID_COLS + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::invalid(
                "tactile pressures must be finite and non-negative",
            ));
        }
        if row >= GRID_ROWS || col >= GRID_COLS {
            return Err(Error::invalid(format!(
                "cell ({row}, {col}) outside the grid"
            )));
        }
        self.0[row * GRID_COLS + col] = value;
        Ok(())
    }

    /// Largest cell and its (row, col); the first one in row-major order on ties.
    pub fn max_cell(&self) -> (f64, (usize, usize)) {
        let mut best = (self.0[0], 0);
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > best.0 {
                best = (v, i);
            }
        }
        (best.0, (best.1 / GRID_COLS, best.1 % GRID_COLS))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        let mut out = self.clone();
        out.0.iter_mut().for_each(|x| *x *= gain);
        out
    }
}

/// One synchronized tactile + joint sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TactileFrame {
    pub t: f64,
    pub grid: TactileGrid,
    pub joint_angles: [f64; NUM_JOINTS],
    pub joint_torques: [f64; NUM_JOINTS],
}

impl TactileFrame {
    pub fn validate(&self) -> Result<()> {
        let finite = self.t.is_finite()
            && self.joint_angles.iter().all(|x| x.is_finite())
            && self.joint_torques.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("tactile frame"));
        }
        TactileGrid::from_cells(self.grid.cells()).map(|_| ())
    }
}
