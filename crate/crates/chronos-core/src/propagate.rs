//! Unitary propagation on a fixed time grid.

use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::state::{inner_product, Representation, StateVector};
use crate::tolerances;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Uniform time grid with nodes t_k = k dt, k = 0..n_steps (inclusive).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::Domain(format!("t_max must be positive, got {t_max}")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("n_steps must be at least 1".into()));
        }
        Ok(TimeGrid { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of stored slices, n_steps + 1.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.node(k)).collect()
    }

    /// Bracketing node index and fraction for an off-node time:
    /// t = (k + frac) dt with 0 <= frac < 1, clamped so k+1 stays a node.
    pub fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        if !(0.0..=self.t_max * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.t_max
            )));
        }
        let pos = t / self.dt();
        let mut k = pos.floor() as usize;
        if k >= self.n_steps {
            k = self.n_steps - 1;
        }
        Ok((k, pos - k as f64))
    }

    /// Index of the node nearest to t.
    pub fn nearest_node(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.t_max * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.t_max
            )));
        }
        Ok(((t / self.dt()).round() as usize).min(self.n_steps))
    }
}

/// A propagated state history: one normalized slice per time node, plus the
/// Hamiltonian that generated it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    time_grid: TimeGrid,
    states: Vec<StateVector>,
    hamiltonian: LinearOperator,
    hbar: f64,
}

impl Trajectory {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &StateVector {
        &self.states[k]
    }

    pub fn hamiltonian(&self) -> &LinearOperator {
        &self.hamiltonian
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn repr(&self) -> &Representation {
        self.states[0].repr()
    }

    /// <A>(t_k) for every node.
    pub fn expectation_series(&self, op: &LinearOperator) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|s| crate::operator::expectation(op, s))
            .collect()
    }

    /// Max |norm(t_k) - 1| over the trajectory.
    pub fn norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Max |<H>(t_k) - <H>(0)| over the trajectory.
    pub fn energy_drift(&self) -> Result<f64> {
        let series = self.expectation_series(&self.hamiltonian)?;
        let e0 = series[0];
        Ok(series.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max))
    }
}

fn check_initial(psi0: &StateVector) -> Result<()> {
    let n2 = psi0.squared_norm();
    if (n2 - 1.0).abs() > tolerances::INITIAL_NORM_SLACK {
        return Err(Error::ContractViolation(format!(
            "initial state must be normalized; squared norm is {n2}"
        )));
    }
    Ok(())
}

/// Strang split-step propagation on a periodic grid.
///
/// Each step applies half the position-diagonal phase, the full
/// momentum-diagonal phase in transform space, and the second half of the
/// position phase; the scheme is unitary and second-order accurate in dt.
/// The Hamiltonian must be a sum of position- and momentum-diagonal parts.
pub fn evolve_split_operator(
    psi0: &StateVector,
    hamiltonian: &LinearOperator,
    time_grid: &TimeGrid,
    hbar: f64,
) -> Result<Trajectory> {
    let grid = match psi0.repr() {
        Representation::Grid(g) => *g,
        Representation::FiniteDim(_) => {
            return Err(Error::RepresentationMismatch(
                "split-step propagation needs a grid state".into(),
            ))
        }
    };
    if hamiltonian.dim() != psi0.dim() {
        return Err(Error::RepresentationMismatch(format!(
            "Hamiltonian dimension {} vs state dimension {}",
            hamiltonian.dim(),
            psi0.dim()
        )));
    }
    if hbar <= 0.0 || !hbar.is_finite() {
        return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
    }
    check_initial(psi0)?;
    let Some((kin, pot)) = hamiltonian.split_diagonals() else {
        return Err(Error::UnsupportedOperator(
            "split-step propagation needs a Hamiltonian that is a sum of \
             position- and momentum-diagonal parts"
                .into(),
        ));
    };

    let dt = time_grid.dt();
    let half_pot: Vec<Complex64> = pot
        .iter()
        .map(|v| Complex64::new(0.0, -v * dt / (2.0 * hbar)).exp())
        .collect();
    let full_kin: Vec<Complex64> = kin
        .iter()
        .map(|v| Complex64::new(0.0, -v * dt / hbar).exp())
        .collect();

    // A vanishing momentum part makes the transform sandwich an exact
    // identity; skipping it keeps never-populated amplitudes at exactly zero
    // instead of picking up transform round-off.
    let pure_phase = kin.iter().all(|v| *v == 0.0);
    let fft = crate::fft::FftPair::new(grid.n_points());
    let mut states = Vec::with_capacity(time_grid.n_nodes());
    states.push(psi0.clone());
    let mut buf = psi0.amplitudes().to_vec();
    for _ in 0..time_grid.n_steps() {
        for (a, p) in buf.iter_mut().zip(&half_pot) {
            *a *= p;
        }
        if !pure_phase {
            fft.forward(&mut buf);
            for (a, k) in buf.iter_mut().zip(&full_kin) {
                *a *= k;
            }
            fft.inverse(&mut buf);
        }
        for (a, p) in buf.iter_mut().zip(&half_pot) {
            *a *= p;
        }
        states.push(StateVector::new(psi0.repr().clone(), buf.clone())?);
    }

    Ok(Trajectory {
        time_grid: *time_grid,
        states,
        hamiltonian: hamiltonian.clone(),
        hbar,
    })
}

/// Exact evolution of a finite-dimensional state by spectral decomposition
/// of a dense Hermitian Hamiltonian.
pub fn evolve_exact(
    psi0: &StateVector,
    hamiltonian: &LinearOperator,
    time_grid: &TimeGrid,
    hbar: f64,
) -> Result<Trajectory> {
    let Representation::FiniteDim(dim) = *psi0.repr() else {
        return Err(Error::RepresentationMismatch(
            "exact spectral evolution is for finite-dimensional states".into(),
        ));
    };
    if hamiltonian.dim() != dim {
        return Err(Error::RepresentationMismatch(format!(
            "Hamiltonian dimension {} vs state dimension {dim}",
            hamiltonian.dim()
        )));
    }
    if !hamiltonian.is_hermitian() {
        return Err(Error::ContractViolation(
            "exact evolution needs a Hermitian Hamiltonian".into(),
        ));
    }
    if hbar <= 0.0 || !hbar.is_finite() {
        return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
    }
    check_initial(psi0)?;
    let dense: DMatrix<Complex64> = hamiltonian.to_dense(psi0.repr())?;
    let eig = nalgebra::SymmetricEigen::new(dense);
    let vectors = eig.eigenvectors;
    let values = eig.eigenvalues;

    // Coefficients in the eigenbasis (plain l2 products; finite-dim weight 1).
    let psi_vec = DVector::from_column_slice(psi0.amplitudes());
    let coeffs = vectors.adjoint() * &psi_vec;

    let mut states = Vec::with_capacity(time_grid.n_nodes());
    for k in 0..time_grid.n_nodes() {
        let t = time_grid.node(k);
        let rotated = DVector::from_iterator(
            dim,
            coeffs
                .iter()
                .zip(values.iter())
                .map(|(c, e)| c * Complex64::new(0.0, -e * t / hbar).exp()),
        );
        let out = &vectors * rotated;
        states.push(StateVector::new(
            psi0.repr().clone(),
            out.iter().copied().collect(),
        )?);
    }

    let traj = Trajectory {
        time_grid: *time_grid,
        states,
        hamiltonian: hamiltonian.clone(),
        hbar,
    };
    let drift = traj.norm_drift();
    if drift > tolerances::EXACT_EVOLUTION_UNITARITY {
        return Err(Error::Numerical(format!(
            "exact evolution lost unitarity: norm drift {drift:.3e}"
        )));
    }
    Ok(traj)
}

/// Max weighted norm of the centered-difference equation-of-motion defect
/// || i hbar (psi_{k+1} - psi_{k-1}) / (2 dt) - H psi_k || over interior
/// nodes. Second-order small in dt for a consistent trajectory.
pub fn schrodinger_residual(traj: &Trajectory) -> Result<f64> {
    let n = traj.time_grid().n_nodes();
    if n < 3 {
        return Err(Error::Domain(
            "residual needs at least three time nodes".into(),
        ));
    }
    let dt = traj.time_grid().dt();
    let hbar = traj.hbar();
    let w = traj.repr().weight();
    let mut worst = 0.0_f64;
    for k in 1..n - 1 {
        let hpsi = traj.hamiltonian().apply(traj.state(k))?;
        let prev = traj.state(k - 1).amplitudes();
        let next = traj.state(k + 1).amplitudes();
        let mut acc = 0.0;
        for i in 0..traj.state(k).dim() {
            let deriv = (next[i] - prev[i]) / (2.0 * dt);
            let defect = Complex64::new(0.0, hbar) * deriv - hpsi.amplitudes()[i];
            acc += defect.norm_sqr();
        }
        worst = worst.max((acc * w).sqrt());
    }
    Ok(worst)
}

/// Squared overlap |<a|b>|^2, the transition probability between two states.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}
