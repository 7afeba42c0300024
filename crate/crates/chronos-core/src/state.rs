//! State vectors over a position grid or a finite basis.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::tolerances;
use num_complex::Complex64;

/// What a state's amplitude slots refer to: samples of a wavefunction on a
/// periodic grid, or coefficients in an n-dimensional basis.
#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Grid(SpatialGrid),
    FiniteDim(usize),
}

impl Representation {
    pub fn dim(&self) -> usize {
        match self {
            Representation::Grid(g) => g.n_points(),
            Representation::FiniteDim(n) => *n,
        }
    }

    /// Quadrature weight carried by each slot: dx on a grid, 1 otherwise.
    pub fn weight(&self) -> f64 {
        match self {
            Representation::Grid(g) => g.dx(),
            Representation::FiniteDim(_) => 1.0,
        }
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        match self {
            Representation::Grid(g) => Some(g),
            Representation::FiniteDim(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Representation::Grid(g) => format!(
                "grid[{}, {}] with {} points",
                g.x_min(),
                g.x_max(),
                g.n_points()
            ),
            Representation::FiniteDim(n) => format!("finite basis of dimension {n}"),
        }
    }
}

/// A pure state: amplitudes plus the representation they live in.
///
/// All norms and inner products carry the representation weight, so a grid
/// state is normalized in the integral sense sum |psi_i|^2 dx = 1.
#[derive(Clone, Debug)]
pub struct StateVector {
    repr: Representation,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(repr: Representation, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != repr.dim() {
            return Err(Error::RepresentationMismatch(format!(
                "{} amplitudes for a {}",
                amplitudes.len(),
                repr.describe()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        Ok(StateVector { repr, amplitudes })
    }

    pub fn grid_state(grid: SpatialGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        StateVector::new(Representation::Grid(grid), amplitudes)
    }

    pub fn finite_state(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = amplitudes.len();
        StateVector::new(Representation::FiniteDim(n), amplitudes)
    }

    /// Sample a wavefunction on the grid. Not normalized.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amps = grid.positions().iter().map(|&x| f(x)).collect();
        StateVector::grid_state(grid, amps)
    }

    /// Normalized Gaussian packet with position spread `sigma` (the standard
    /// deviation of |psi|^2), centered at `x0` with mean momentum `p0`.
    pub fn gaussian(grid: SpatialGrid, x0: f64, p0: f64, sigma: f64, hbar: f64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::Domain(format!("gaussian needs sigma > 0, got {sigma}")));
        }
        let psi = StateVector::from_fn(grid, |x| {
            let arg = -((x - x0) * (x - x0)) / (4.0 * sigma * sigma);
            let phase = p0 * (x - x0) / hbar;
            Complex64::new(0.0, phase).exp() * arg.exp()
        })?;
        psi.normalize()
    }

    pub fn repr(&self) -> &Representation {
        &self.repr
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// Weighted squared norm sum |a_i|^2 w.
    pub fn squared_norm(&self) -> f64 {
        let w = self.repr.weight();
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * w
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    /// Scale to unit norm. Errors on (numerically) zero states.
    pub fn normalize(mut self) -> Result<Self> {
        let n2 = self.squared_norm();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(Error::Domain(format!(
                "cannot normalize state with squared norm {n2}"
            )));
        }
        let s = 1.0 / n2.sqrt();
        for a in &mut self.amplitudes {
            *a *= s;
        }
        debug_assert!((self.squared_norm() - 1.0).abs() < tolerances::NORM_AFTER_NORMALIZE);
        Ok(self)
    }

    /// Per-slot probability density |a_i|^2 (multiply by the representation
    /// weight to get probabilities).
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub(crate) fn same_repr(&self, other: &StateVector) -> bool {
        self.repr == other.repr
    }
}

/// Weighted inner product <a|b> = sum conj(a_i) b_i w; conjugate-linear in
/// the first argument.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if !a.same_repr(b) {
        return Err(Error::RepresentationMismatch(format!(
            "inner product between a {} and a {}",
            a.repr().describe(),
            b.repr().describe()
        )));
    }
    let w = a.repr().weight();
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        acc += x.conj() * y;
    }
    Ok(acc * w)
}
