//! Sampling design and observed fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Shape of a full rectangular grid, `nx` columns by `ny` rows, stored
/// row-major (`index = row * nx + col`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub nx: usize,
    pub ny: usize,
}

/// `L` sites with planar coordinates in km, an optional time coordinate in
/// hours, and quadrature weights used by integral-type functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSet {
    pub coords: Vec<[f64; 2]>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    pub quad_weights: Vec<f64>,
    #[serde(default)]
    pub grid: Option<GridShape>,
}

impl SiteSet {
    pub fn new(coords: Vec<[f64; 2]>) -> Self {
        let n = coords.len();
        Self {
            coords,
            times: None,
            quad_weights: vec![1.0; n],
            grid: None,
        }
    }

    /// Equally spaced sites on the x axis, starting at the origin.
    pub fn line(n: usize, spacing: f64) -> Self {
        Self::new((0..n).map(|i| [i as f64 * spacing, 0.0]).collect())
    }

    /// Full `nx` by `ny` grid with cell areas as quadrature weights.
    pub fn grid(nx: usize, ny: usize, spacing: f64) -> Self {
        let mut coords = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            for col in 0..nx {
                coords.push([col as f64 * spacing, row as f64 * spacing]);
            }
        }
        Self {
            quad_weights: vec![spacing * spacing; nx * ny],
            coords,
            times: None,
            grid: Some(GridShape { nx, ny }),
        }
    }

    /// Space-time design: every spatial site replicated at every time.
    /// Site `t * n_space + s` is spatial site `s` at `times[t]`.
    pub fn space_time(space: &SiteSet, times: &[f64]) -> Self {
        let ns = space.len();
        let mut coords = Vec::with_capacity(ns * times.len());
        let mut tt = Vec::with_capacity(ns * times.len());
        let mut w = Vec::with_capacity(ns * times.len());
        for &t in times {
            coords.extend_from_slice(&space.coords);
            w.extend_from_slice(&space.quad_weights);
            tt.extend(std::iter::repeat(t).take(ns));
        }
        Self {
            coords,
            times: Some(tt),
            quad_weights: w,
            grid: None,
        }
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        if times.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: times.len(),
            });
        }
        self.times = Some(times);
        Ok(self)
    }

    pub fn with_quad_weights(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|v| !(*v >= 0.0)) {
            return invalid("quadrature weights must be non-negative");
        }
        self.quad_weights = w;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times.as_ref().map_or(0.0, |t| t[i])
    }

    /// Displacement from site `i` to site `j`: `(s_j - s_i, t_j - t_i)`.
    pub fn lag(&self, i: usize, j: usize) -> ([f64; 2], f64) {
        let (a, b) = (self.coords[i], self.coords[j]);
        ([b[0] - a[0], b[1] - a[1]], self.time(j) - self.time(i))
    }

    pub fn subset(&self, idx: &[usize]) -> SiteSet {
        SiteSet {
            coords: idx.iter().map(|&i| self.coords[i]).collect(),
            times: self.times.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
            quad_weights: idx.iter().map(|&i| self.quad_weights[i]).collect(),
            grid: None,
        }
    }
}

/// One event: values at the `L` sites plus an identifier and time stamp.
///
/// `cluster` groups several observations belonging to the same physical
/// event (for example successive time steps of one storm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldObservation {
    pub id: usize,
    pub time: f64,
    pub values: Vec<f64>,
    #[serde(default)]
    pub cluster: Option<usize>,
}

impl FieldObservation {
    pub fn new(id: usize, time: f64, values: Vec<f64>) -> Self {
        Self {
            id,
            time,
            values,
            cluster: None,
        }
    }
}
