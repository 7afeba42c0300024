//! Uniform periodic position grid and its conjugate wavenumbers.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Uniform grid on [x_min, x_max) with periodic boundary conditions.
///
/// The right edge is identified with the left one, so grid points are
/// x_i = x_min + i dx for i in 0..n_points with dx = (x_max - x_min)/n_points.
/// The point count must be a power of two (spectral transforms) and at
/// least 8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Domain("grid edges must be finite".into()));
        }
        if x_max <= x_min {
            return Err(Error::Domain(format!(
                "grid needs x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::Domain(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        Ok(SpatialGrid {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.position(i)).collect()
    }

    /// Wavenumbers in transform order: k_j = (2 pi / L) j for j < n/2 and the
    /// negative aliases above, with the Nyquist slot at -n/2.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as isize;
        let dk = TAU / self.length();
        (0..n)
            .map(|j| {
                let m = if j < (n + 1) / 2 { j } else { j - n };
                m as f64 * dk
            })
            .collect()
    }

    /// Index of the grid point nearest to x; the periodic image of the right
    /// edge maps back to index 0.
    pub fn nearest_index(&self, x: f64) -> Result<usize> {
        if !(self.x_min..=self.x_max).contains(&x) {
            return Err(Error::Domain(format!(
                "position {x} outside grid [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let i = ((x - self.x_min) / self.dx()).round() as usize;
        Ok(if i >= self.n_points { 0 } else { i })
    }
}
