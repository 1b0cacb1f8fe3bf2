//! Audio + tactile object property estimation and reactive grip control.
//!
//! The crate runs end to end on a deterministic simulator of a hand holding an
//! opaque container with granular contents:
//!
//! * [`sim`] steps the hand/container/contents physics and renders the audio,
//!   tactile and joint streams together with ground-truth slip and drop events.
//! * [`dsp`] crops, segments, augments and turns audio into MFCC matrices.
//! * [`tactile`] computes haptic feature vectors and joint-threshold slip labels.
//! * [`models`] holds the MFCC material classifier and the recurrent
//!   slip / max-force predictor, both with hand-written backward passes.
//! * [`controller`] generates motion profiles and runs the reactive grip loop.
//! * [`active`] maintains the material posterior and picks motions by
//!   expected information gain.
//! * [`dataset`] generates, stores and splits trial datasets.

pub mod active;
pub mod controller;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod models;
pub mod pipeline;
pub mod sim;
pub mod tactile;

pub use error::{Error, Result};
pub use sim::material::Material;

/// Audio sample rate of the simulated microphone, Hz.
pub const SAMPLE_RATE: u32 = 16_000;
/// Simulator step, seconds.
pub const SIM_DT: f64 = 0.005;
/// Tactile grid rows.
pub const GRID_ROWS: usize = 16;
/// Tactile grid columns.
pub const GRID_COLS: usize = 16;
/// Number of tactile cells.
pub const GRID_CELLS: usize = GRID_ROWS * GRID_COLS;
/// Hand joints (four fingers with four joints each).
pub const NUM_JOINTS: usize = 16;
