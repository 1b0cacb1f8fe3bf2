use super::{TactileFrame, TactileGrid};
use crate::{Error, Result, GRID_COLS, GRID_ROWS, NUM_JOINTS};

/// Length of [`FeatureVector::to_vec`].
pub const FEATURE_DIM: usize = 6 + 2 * NUM_JOINTS;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub t: f64,
    /// Mean over cells strictly above zero, N.
    pub mean_nz: f64,
    /// Max over cells strictly above zero, N.
    pub max_nz: f64,
    /// Pressure-weighted (row, col).
    pub com: (f64, f64),
    /// Rate of change of `com`, cells/s.
    pub com_grad: (f64, f64),
    pub joint_angles: [f64; NUM_JOINTS],
    /// rad/s
    pub joint_deltas: [f64; NUM_JOINTS],
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FEATURE_DIM);
        v.extend([
            self.mean_nz,
            self.max_nz,
            self.com.0,
            self.com.1,
            self.com_grad.0,
            self.com_grad.1,
        ]);
        v.extend_from_slice(&self.joint_angles);
        v.extend_from_slice(&self.joint_deltas);
        v
    }
}

/// Sliding window of `W` consecutive feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWindow {
    pub vectors: Vec<FeatureVector>,
    pub dt: f64,
}

impl FeatureWindow {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Time of the newest frame.
    pub fn end_time(&self) -> f64 {
        self.vectors.last().map_or(0.0, |v| v.t)
    }
}

pub fn nonzero_stats(grid: &TactileGrid) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for &x in grid.cells().iter().filter(|&&x| x > 0.0) {
        n += 1;
        sum += x;
        max = max.max(x);
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (sum / n as f64, max)
    }
}

/// Pressure-weighted mean (row, col); the grid centre for an all-zero grid.
pub fn center_of_mass(grid: &TactileGrid) -> (f64, f64) {
    let mut total = 0.0;
    let mut r_acc = 0.0;
    let mut c_acc = 0.0;
    for (i, &x) in grid.cells().iter().enumerate() {
        if x > 0.0 {
            total += x;
            r_acc += x * (i / GRID_COLS) as f64;
            c_acc += x * (i % GRID_COLS) as f64;
        }
    }
    if total > 0.0 {
        (r_acc / total, c_acc / total)
    } else {
        (
            (GRID_ROWS as f64 - 1.0) / 2.0,
            (GRID_COLS as f64 - 1.0) / 2.0,
        )
    }
}

pub fn com_gradient(prev: (f64, f64), cur: (f64, f64), dt: f64) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    Ok(((cur.0 - prev.0) / dt, (cur.1 - prev.1) / dt))
}

/// Features of `cur`, with rates taken against `prev`. Without a previous
/// frame the rates are zero.
pub fn feature_vector(prev: Option<&TactileFrame>, cur: &TactileFrame) -> Result<FeatureVector> {
    let (mean_nz, max_nz) = nonzero_stats(&cur.grid);
    let com = center_of_mass(&cur.grid);
    let (com_grad, joint_deltas) = match prev {
        Some(p) => {
            let dt = cur.t - p.t;
            let grad = com_gradient(center_of_mass(&p.grid), com, dt)?;
            let mut deltas = [0.0; NUM_JOINTS];
            for (d, (a, b)) in deltas
                .iter_mut()
                .zip(cur.joint_angles.iter().zip(&p.joint_angles))
            {
                *d = (a - b) / dt;
            }
            (grad, deltas)
        }
        None => ((0.0, 0.0), [0.0; NUM_JOINTS]),
    };
    Ok(FeatureVector {
        t: cur.t,
        mean_nz,
        max_nz,
        com,
        com_grad,
        joint_angles: cur.joint_angles,
        joint_deltas,
    })
}

/// Online windowing: push frames as they arrive, get a window once `W`
/// feature vectors are available.
#[derive(Clone, Debug)]
pub struct WindowBuilder {
    width: usize,
    prev: Option<TactileFrame>,
    vectors: std::collections::VecDeque<FeatureVector>,
}

impl WindowBuilder {
    pub fn new(width: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::invalid("window length must be at least 2"));
        }
        Ok(WindowBuilder {
            width,
            prev: None,
            vectors: std::collections::VecDeque::with_capacity(width),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn push(&mut self, frame: &TactileFrame) -> Result<Option<FeatureWindow>> {
        if let Some(p) = &self.prev {
            if !(frame.t > p.t) {
                return Err(Error::invalid("frame timestamps must strictly increase"));
            }
        }
        let fv = feature_vector(self.prev.as_ref(), frame)?;
        self.prev = Some(frame.clone());
        if self.vectors.len() == self.width {
            self.vectors.pop_front();
        }
        self.vectors.push_back(fv);
        if self.vectors.len() < self.width {
            return Ok(None);
        }
        let vectors: Vec<FeatureVector> = self.vectors.iter().cloned().collect();
        let dt = (vectors[vectors.len() - 1].t - vectors[0].t) / (vectors.len() - 1) as f64;
        Ok(Some(FeatureWindow { vectors, dt }))
    }
}

/// Stride-1 sliding windows over a frame stream; fewer than `W` frames
/// yields no windows.
pub fn make_windows(frames: &[TactileFrame], width: usize) -> Result<Vec<FeatureWindow>> {
    let mut builder = WindowBuilder::new(width)?;
    let mut out = Vec::with_capacity(frames.len().saturating_sub(width - 1));
    for f in frames {
        if let Some(w) = builder.push(f)? {
            out.push(w);
        }
    }
    Ok(out)
}
