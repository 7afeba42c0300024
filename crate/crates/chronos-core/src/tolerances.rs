//! Central numerical tolerances.
//!
//! Every bound the library enforces or reports against lives here, so tests,
//! the check command, and the docs agree on one set of numbers. Values are
//! chosen for double precision and the discretizations used by the built-in
//! scenarios; they are deliberate contracts, not measured noise floors.

/// Max |norm^2 - 1| tolerated right after `normalize`.
pub const NORM_AFTER_NORMALIZE: f64 = 1e-10;

/// Max |norm(t_k) - norm(0)| over a propagated trajectory.
pub const NORM_DRIFT: f64 = 1e-10;

/// Entrywise bound for a dense matrix to count as Hermitian at build time.
pub const HERMITICITY_BUILD: f64 = 1e-12;

/// Allowed imaginary residual of <psi|A|psi> for a Hermitian A.
pub const EXPECTATION_IMAG_RESIDUAL: f64 = 1e-9;

/// Unitarity defect allowed for exact spectral evolution.
pub const EXACT_EVOLUTION_UNITARITY: f64 = 1e-12;

/// Quadrature of a continuous collapse density over [0, T_max] must return 1
/// within this bound.
pub const DENSITY_NORMALIZATION: f64 = 1e-9;

/// |Tr(Omega) - 1| for a smeared state.
pub const OMEGA_TRACE: f64 = 1e-8;

/// Entrywise Hermiticity defect of a dense smeared state.
pub const OMEGA_HERMITICITY: f64 = 1e-10;

/// Smallest admissible eigenvalue of a smeared state (round-off floor).
pub const OMEGA_EIGENVALUE_FLOOR: f64 = -1e-9;

/// |Tr(Omega A) - <<A>>|: the two evaluation routes must agree this well.
pub const TRACE_IDENTITY: f64 = 1e-8;

/// Point-mass recovery: |<<A>>_delta(t') - <A>(t')| with linear
/// interpolation between bracketing slices.
pub const DELTA_RECOVERY: f64 = 1e-6;

/// |total mass - 1| for the joint space-time density.
pub const JOINT_NORMALIZATION: f64 = 1e-6;

/// Max |sum_x p(x, t_k) dx - f(t_k)| per time slice.
pub const SLICE_MARGINAL: f64 = 1e-8;

/// Max discrepancy between the two Bayes factorizations of p(x, t).
pub const BAYES_RESIDUAL: f64 = 1e-10;

/// Spatial marginal below this value makes the conditional-in-time density
/// undefined at that position.
pub const CONDITIONAL_FLOOR: f64 = 1e-300;

/// |d<A>/dt| below this value makes the time-resolution estimate infinite.
pub const DERIVATIVE_FLOOR: f64 = 1e-12;

/// Default dimension cap for materializing a dense smeared state.
pub const DENSE_OMEGA_CAP: usize = 2048;

/// Largest |norm^2 - 1| accepted for a caller-supplied initial state.
pub const INITIAL_NORM_SLACK: f64 = 1e-6;

/// Raw tabulated densities must integrate to 1 within this bound before the
/// loader accepts them (exact renormalization happens afterwards).
pub const TABULATED_MASS_SLACK: f64 = 1e-3;

// Ordering between the bounds is part of their meaning: build-time
// Hermiticity is stricter than the smeared-state report, which is stricter
// than the trace identity, and per-slice marginals are tighter than the
// total normalization. Enforced when this module compiles.
const _: () = {
    assert!(HERMITICITY_BUILD < OMEGA_HERMITICITY);
    assert!(OMEGA_HERMITICITY < TRACE_IDENTITY);
    assert!(SLICE_MARGINAL < JOINT_NORMALIZATION);
    assert!(OMEGA_EIGENVALUE_FLOOR < 0.0);
    assert!(CONDITIONAL_FLOOR > 0.0);
};
