//! Readout-time averaging: expectation values integrated against f(t), the
//! mixed state assembled from a trajectory, and time-resolution diagnostics.
//!
//! The central objects are the smeared average of an observable,
//! integral of f(t) <A>(t) dt, and the smeared state
//! Omega = integral of f(t) |psi(t)><psi(t)| dt, a positive unit-trace
//! operator. Both are evaluated with composite Simpson weights on the
//! trajectory's own time grid; the sharp-time (Delta) density bypasses
//! quadrature entirely and reads the bracketing slices instead.

use crate::collapse::CollapseDistribution;
use crate::error::{Error, Result};
use crate::operator::{expectation, hermiticity_defect, variance, LinearOperator};
use crate::propagate::Trajectory;
use crate::quad::{simpson_weights, trapezoid_weights};
use crate::state::{Representation, StateVector};
use crate::textio::sig17;
use crate::tolerances;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// How a smeared quantity was integrated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureRule {
    /// Composite Simpson weights on the trajectory nodes.
    CompositeSimpson { nodes: usize },
    /// Sharp readout time: bracketing slices only, no quadrature.
    SharpSlice { t: f64 },
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureRule::CompositeSimpson { nodes } => {
                write!(f, "composite Simpson on {nodes} nodes")
            }
            QuadratureRule::SharpSlice { t } => write!(f, "sharp slice at t = {t}"),
        }
    }
}

/// A smeared expectation value with its per-slice breakdown.
///
/// For quadrature densities, `value` is exactly the Simpson-weighted sum of
/// `integrand` and `quadrature_error` is the spread against the trapezoid
/// rule on the same nodes. For the sharp-time density the value comes from
/// linear interpolation between the two bracketing slices; the density and
/// integrand columns are zero because the mass is symbolic, and the error
/// field estimates the interpolation error from local curvature.
#[derive(Clone, Debug)]
pub struct SmearReport {
    pub value: f64,
    pub times: Vec<f64>,
    pub densities: Vec<f64>,
    pub expectations: Vec<f64>,
    pub integrand: Vec<f64>,
    pub quadrature_error: f64,
    pub rule: QuadratureRule,
}

impl SmearReport {
    /// Per-slice table as CSV with header `t,f,expectation,integrand`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 64 + 32);
        out.push_str("t,f,expectation,integrand\n");
        for i in 0..self.times.len() {
            out.push_str(&sig17(self.times[i]));
            out.push(',');
            out.push_str(&sig17(self.densities[i]));
            out.push(',');
            out.push_str(&sig17(self.expectations[i]));
            out.push(',');
            out.push_str(&sig17(self.integrand[i]));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn check_coverage(traj: &Trajectory, dist: &CollapseDistribution) -> Result<()> {
    let span = traj.time_grid().t_max();
    if dist.t_max() > span * (1.0 + 1e-12) {
        return Err(Error::Coverage(format!(
            "readout density reaches t = {} but the trajectory stops at {span}; \
             extend the trajectory instead of silently truncating",
            dist.t_max()
        )));
    }
    Ok(())
}

fn check_operator(traj: &Trajectory, op: &LinearOperator) -> Result<()> {
    if op.dim() != traj.state(0).dim() {
        return Err(Error::RepresentationMismatch(format!(
            "operator dimension {} vs trajectory dimension {}",
            op.dim(),
            traj.state(0).dim()
        )));
    }
    Ok(())
}

/// Smeared average of an observable over the readout-time density.
pub fn smeared_expectation(
    traj: &Trajectory,
    dist: &CollapseDistribution,
    op: &LinearOperator,
) -> Result<SmearReport> {
    check_coverage(traj, dist)?;
    check_operator(traj, op)?;
    let times = traj.time_grid().nodes();
    let expectations = traj.expectation_series(op)?;
    let n = times.len();

    if let Some(t_prime) = dist.delta_time() {
        let (k, frac) = traj.time_grid().bracket(t_prime)?;
        let value = (1.0 - frac) * expectations[k] + frac * expectations[k + 1];
        // Linear interpolation errs by at most curvature * dt^2 / 8; estimate
        // the curvature from a neighboring second difference when one exists.
        let curvature = if n >= 3 {
            let j = k.clamp(1, n - 2);
            (expectations[j + 1] - 2.0 * expectations[j] + expectations[j - 1]).abs()
        } else {
            0.0
        };
        return Ok(SmearReport {
            value,
            densities: vec![0.0; n],
            integrand: vec![0.0; n],
            times,
            expectations,
            quadrature_error: 0.125 * curvature,
            rule: QuadratureRule::SharpSlice { t: t_prime },
        });
    }

    let densities: Vec<f64> = times.iter().map(|&t| dist.pdf_clamped(t)).collect();
    let integrand: Vec<f64> = densities
        .iter()
        .zip(&expectations)
        .map(|(f, e)| f * e)
        .collect();
    let dt = traj.time_grid().dt();
    let ws = simpson_weights(n, dt);
    let wt = trapezoid_weights(n, dt);
    let value: f64 = ws.iter().zip(&integrand).map(|(w, g)| w * g).sum();
    let alt: f64 = wt.iter().zip(&integrand).map(|(w, g)| w * g).sum();
    Ok(SmearReport {
        value,
        times,
        densities,
        expectations,
        integrand,
        quadrature_error: (value - alt).abs(),
        rule: QuadratureRule::CompositeSimpson { nodes: n },
    })
}

/// Smeared average of the readout time itself. The time label has zero
/// spread at a fixed instant, so the average reduces to the first moment
/// of the density.
pub fn smeared_time_expectation(dist: &CollapseDistribution) -> Result<f64> {
    dist.moment(1)
}

/// The smeared state: either an explicit dense matrix or a deferred
/// (trajectory, density) pair for dimensions past the dense cap.
#[derive(Clone, Debug)]
pub enum SmearedState {
    Dense {
        matrix: DMatrix<Complex64>,
        repr: Representation,
        rule: QuadratureRule,
    },
    MatrixFree {
        traj: Arc<Trajectory>,
        dist: CollapseDistribution,
    },
}

impl SmearedState {
    pub fn dense_matrix(&self) -> Option<&DMatrix<Complex64>> {
        match self {
            SmearedState::Dense { matrix, .. } => Some(matrix),
            SmearedState::MatrixFree { .. } => None,
        }
    }

    pub fn rule(&self) -> QuadratureRule {
        match self {
            SmearedState::Dense { rule, .. } => *rule,
            SmearedState::MatrixFree { traj, .. } => QuadratureRule::CompositeSimpson {
                nodes: traj.time_grid().n_nodes(),
            },
        }
    }
}

/// Accumulate w |psi><psi| into the upper triangle of m (amplitude
/// coordinates, including the representation weight so the plain matrix
/// trace integrates the density).
fn accumulate_outer(m: &mut DMatrix<Complex64>, psi: &StateVector, w: f64) {
    let amps = psi.amplitudes();
    let n = amps.len();
    for i in 0..n {
        let wi = amps[i] * w;
        for j in i..n {
            m[(i, j)] += wi * amps[j].conj();
        }
    }
}

fn mirror_lower(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)].conj();
        }
    }
}

/// Dense smeared state Omega = sum of w_k f(t_k) |psi_k><psi_k| with Simpson
/// weights. The sharp-time density instead yields the rank-1 projector of
/// the interpolated (renormalized) slice. Dimensions past the dense cap are
/// refused; use [`matrix_free`] there.
pub fn build_omega(traj: &Trajectory, dist: &CollapseDistribution) -> Result<SmearedState> {
    check_coverage(traj, dist)?;
    let dim = traj.state(0).dim();
    if dim > tolerances::DENSE_OMEGA_CAP {
        return Err(Error::Resource(format!(
            "dense smeared state at dimension {dim} exceeds the cap {}; use \
             the matrix-free form",
            tolerances::DENSE_OMEGA_CAP
        )));
    }
    let weight = traj.repr().weight();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);

    let rule = if let Some(t_prime) = dist.delta_time() {
        let (k, frac) = traj.time_grid().bracket(t_prime)?;
        let a = traj.state(k).amplitudes();
        let b = traj.state(k + 1).amplitudes();
        let mixed: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| x * (1.0 - frac) + y * frac)
            .collect();
        // Interpolation shrinks the norm at second order; renormalize so the
        // projector keeps unit trace exactly.
        let slice = StateVector::new(traj.repr().clone(), mixed)?.normalize()?;
        accumulate_outer(&mut m, &slice, weight);
        QuadratureRule::SharpSlice { t: t_prime }
    } else {
        let n = traj.time_grid().n_nodes();
        let ws = simpson_weights(n, traj.time_grid().dt());
        for (k, wk) in ws.iter().enumerate() {
            let f = dist.pdf_clamped(traj.time_grid().node(k));
            if f == 0.0 {
                continue;
            }
            accumulate_outer(&mut m, traj.state(k), wk * f * weight);
        }
        QuadratureRule::CompositeSimpson { nodes: n }
    };
    mirror_lower(&mut m);
    Ok(SmearedState::Dense {
        matrix: m,
        repr: traj.repr().clone(),
        rule,
    })
}

/// Deferred smeared state for dimensions past the dense cap: stores the
/// trajectory and density and evaluates traces against operators by
/// quadrature, never materializing the matrix.
pub fn matrix_free(traj: Arc<Trajectory>, dist: CollapseDistribution) -> Result<SmearedState> {
    check_coverage(&traj, &dist)?;
    Ok(SmearedState::MatrixFree { traj, dist })
}

/// Density-operator property report for a smeared state.
///
/// The dense form reports every field; the matrix-free form reports only the
/// trace-against-operator path (its other checks would require the matrix).
#[derive(Clone, Copy, Debug, Default)]
pub struct OmegaChecks {
    pub trace: Option<f64>,
    pub trace_imag: Option<f64>,
    pub hermiticity_defect: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub purity: Option<f64>,
    /// Tr(Omega A), from the matrix when dense, by quadrature otherwise.
    pub trace_product: Option<f64>,
    /// The same observable smeared directly over the trajectory.
    pub smeared_value: Option<f64>,
    /// |trace_product - smeared_value|: the two evaluation paths must agree.
    pub identity_residual: Option<f64>,
}

/// Evaluate the density-operator checks, optionally against an observable.
/// For the dense form with an observable this exercises two genuinely
/// different code paths (matrix trace vs slice quadrature) whose agreement
/// is the operational content of the trace identity.
pub fn omega_trace_checks(
    state: &SmearedState,
    traj: &Trajectory,
    dist: &CollapseDistribution,
    op: Option<&LinearOperator>,
) -> Result<OmegaChecks> {
    let mut checks = OmegaChecks::default();
    match state {
        SmearedState::Dense { matrix, repr, .. } => {
            let tr = matrix.diagonal().iter().sum::<Complex64>();
            checks.trace = Some(tr.re);
            checks.trace_imag = Some(tr.im);
            checks.hermiticity_defect = Some(hermiticity_defect(matrix));
            checks.purity = Some(matrix.iter().map(|z| z.norm_sqr()).sum());
            let eig = nalgebra::SymmetricEigen::new(matrix.clone());
            checks.min_eigenvalue = eig.eigenvalues.iter().copied().reduce(f64::min);
            if let Some(op) = op {
                let dense_op = op.to_dense(repr)?;
                let mut tr_prod = Complex64::new(0.0, 0.0);
                for i in 0..matrix.nrows() {
                    for j in 0..matrix.ncols() {
                        tr_prod += matrix[(i, j)] * dense_op[(j, i)];
                    }
                }
                checks.trace_product = Some(tr_prod.re);
            }
        }
        SmearedState::MatrixFree { traj, dist } => {
            if let Some(op) = op {
                checks.trace_product = Some(smeared_expectation(traj, dist, op)?.value);
            }
        }
    }
    if let (Some(op), Some(tp)) = (op, checks.trace_product) {
        let report = smeared_expectation(traj, dist, op)?;
        checks.smeared_value = Some(report.value);
        checks.identity_residual = Some((tp - report.value).abs());
    }
    Ok(checks)
}

/// Time for the expectation of an observable to drift by one standard
/// deviation: Delta A / |d<A>/dt| at an interior node, by centered
/// difference. Returns +infinity when the drift rate is below the numeric
/// floor (a constant expectation has no finite drift time).
pub fn griffiths_delta_t(traj: &Trajectory, op: &LinearOperator, t: f64) -> Result<f64> {
    check_operator(traj, op)?;
    let k = traj.time_grid().nearest_node(t)?;
    let last = traj.time_grid().n_steps();
    if k == 0 || k == last {
        return Err(Error::Domain(format!(
            "drift time needs an interior node; t = {t} lands on the boundary"
        )));
    }
    let dt = traj.time_grid().dt();
    let e_prev = expectation(op, traj.state(k - 1))?;
    let e_next = expectation(op, traj.state(k + 1))?;
    let rate = (e_next - e_prev) / (2.0 * dt);
    if rate.abs() < tolerances::DERIVATIVE_FLOOR {
        return Ok(f64::INFINITY);
    }
    let spread = variance(op, traj.state(k))?.max(0.0).sqrt();
    Ok(spread / rate.abs())
}

/// The energy-time product Delta E * Delta T against the h_bar/2 benchmark.
///
/// Delta T is the standard deviation of the readout-time density (the time
/// label has zero spread at a fixed instant, so the smeared second moment
/// reduces to the density's variance); Delta E is the energy spread of the
/// initial slice, constant under unitary evolution. The product is reported,
/// never asserted: a stationary state has Delta E = 0 under any density, so
/// the benchmark cannot hold for arbitrary inputs.
#[derive(Clone, Copy, Debug)]
pub struct EnergyTimeReport {
    pub delta_t: f64,
    pub delta_e: f64,
    pub product: f64,
    pub benchmark: f64,
    pub satisfies_benchmark: bool,
}

pub fn energy_time_report(
    traj: &Trajectory,
    dist: &CollapseDistribution,
) -> Result<EnergyTimeReport> {
    check_coverage(traj, dist)?;
    let delta_t = dist.variance()?.sqrt();
    let delta_e = variance(traj.hamiltonian(), traj.state(0))?.max(0.0).sqrt();
    let product = delta_e * delta_t;
    let benchmark = traj.hbar() / 2.0;
    Ok(EnergyTimeReport {
        delta_t,
        delta_e,
        product,
        benchmark,
        satisfies_benchmark: product >= benchmark,
    })
}
