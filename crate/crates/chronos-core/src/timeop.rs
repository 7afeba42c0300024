//! The time-label operator and the evolution generator acting on whole
//! trajectories, with their commutator and self-adjointness diagnostics.
//!
//! A trajectory is viewed as one object indexed by (time node, component).
//! The time-label operator multiplies row k by t_k, exactly. The generator
//! differentiates along the time axis (i h_bar d/dt) with centered interior
//! stencils and second-order one-sided ends. Their commutator measured on
//! smooth test data is -i h_bar up to O(dt^2): the sign produced by the
//! product rule under this generator convention is reported as measured,
//! never silently flipped.

use crate::error::{Error, Result};
use crate::propagate::Trajectory;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// A complex-valued function on the (time node, component) lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeFunction {
    times: Vec<f64>,
    dt: f64,
    values: Vec<Vec<Complex64>>,
    /// Component-axis measure for row norms (dx on grids, 1 otherwise).
    weight: f64,
    hbar: f64,
}

impl SpacetimeFunction {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Vec<Complex64>>,
        weight: f64,
        hbar: f64,
    ) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Domain(format!(
                "need one row per time node, got {} nodes and {} rows",
                times.len(),
                values.len()
            )));
        }
        let width = values[0].len();
        if width == 0 || values.iter().any(|r| r.len() != width) {
            return Err(Error::Domain("rows must share a nonzero width".into()));
        }
        let dt = if times.len() > 1 {
            times[1] - times[0]
        } else {
            0.0
        };
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(Error::Domain(
                    "time nodes must be uniformly spaced".into(),
                ));
            }
        }
        if weight <= 0.0 || hbar <= 0.0 {
            return Err(Error::Domain(
                "measure weight and hbar must be positive".into(),
            ));
        }
        Ok(SpacetimeFunction {
            times,
            dt,
            values,
            weight,
            hbar,
        })
    }

    /// View a trajectory as a spacetime function (rows are the slices).
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        SpacetimeFunction {
            times: traj.time_grid().nodes(),
            dt: traj.time_grid().dt(),
            values: traj
                .states()
                .iter()
                .map(|s| s.amplitudes().to_vec())
                .collect(),
            weight: traj.repr().weight(),
            hbar: traj.hbar(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    /// Weighted l2 norm of row k.
    pub fn row_norm(&self, k: usize) -> f64 {
        (self.values[k].iter().map(|v| v.norm_sqr()).sum::<f64>() * self.weight).sqrt()
    }

    /// Multiply row k by the time label t_k. Exact: no discretization enters.
    pub fn apply_time_label(&self) -> SpacetimeFunction {
        let mut out = self.clone();
        for (k, row) in out.values.iter_mut().enumerate() {
            let t = out.times[k];
            for v in row.iter_mut() {
                *v *= t;
            }
        }
        out
    }

    /// Expectation of the time label in slice k, normalized by the slice
    /// norm; equals t_k identically because the slice is an eigenrow.
    pub fn slice_time_expectation(&self, k: usize) -> Result<f64> {
        if k >= self.n_nodes() {
            return Err(Error::Domain(format!("no time node {k}")));
        }
        let labeled = self.apply_time_label();
        let num: Complex64 = self.values[k]
            .iter()
            .zip(&labeled.values[k])
            .map(|(a, b)| a.conj() * b)
            .sum();
        let den: f64 = self.values[k].iter().map(|v| v.norm_sqr()).sum();
        if den == 0.0 {
            return Err(Error::Domain(format!("slice {k} is identically zero")));
        }
        Ok(num.re / den)
    }

    /// i h_bar d/dt along the time axis: centered differences inside,
    /// second-order one-sided stencils at the two ends.
    pub fn apply_time_generator(&self) -> Result<SpacetimeFunction> {
        let n = self.n_nodes();
        if n < 3 {
            return Err(Error::Domain(
                "the time generator needs at least three nodes".into(),
            ));
        }
        let width = self.values[0].len();
        let ih = Complex64::new(0.0, self.hbar);
        let two_dt = 2.0 * self.dt;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut row = Vec::with_capacity(width);
            for i in 0..width {
                let d = if k == 0 {
                    (-3.0 * self.values[0][i] + 4.0 * self.values[1][i] - self.values[2][i])
                        / two_dt
                } else if k == n - 1 {
                    (3.0 * self.values[n - 1][i] - 4.0 * self.values[n - 2][i]
                        + self.values[n - 3][i])
                        / two_dt
                } else {
                    (self.values[k + 1][i] - self.values[k - 1][i]) / two_dt
                };
                row.push(ih * d);
            }
            out.push(row);
        }
        Ok(SpacetimeFunction {
            times: self.times.clone(),
            dt: self.dt,
            values: out,
            weight: self.weight,
            hbar: self.hbar,
        })
    }

    /// Max weighted interior-row norm of (label o generator - generator o
    /// label) applied to this function, plus i h_bar times the function.
    /// Zero for data constant in t; O(dt^2) for smooth data. A vanishing
    /// residual certifies that the measured commutator is -i h_bar (note the
    /// sign: it is what the product rule yields for this generator).
    pub fn commutator_residual(&self) -> Result<f64> {
        let r = self.commutator_defect_rows()?;
        let n = self.n_nodes();
        let mut worst = 0.0_f64;
        for (k, row) in r.iter().enumerate() {
            if k == 0 || k == n - 1 {
                continue;
            }
            let norm =
                (row.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.weight).sqrt();
            worst = worst.max(norm);
        }
        Ok(worst)
    }

    /// The effective commutator constant c in (label o generator -
    /// generator o label) = c * identity, extracted as a weighted Rayleigh
    /// quotient over interior nodes. Smooth data gives c = -i h_bar + O(dt^2).
    pub fn commutator_constant(&self) -> Result<Complex64> {
        let lg = self.apply_time_generator()?.apply_time_label();
        let gl = self.apply_time_label().apply_time_generator()?;
        let n = self.n_nodes();
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for k in 1..n - 1 {
            for i in 0..self.values[k].len() {
                let comm = lg.values[k][i] - gl.values[k][i];
                num += self.values[k][i].conj() * comm;
                den += self.values[k][i].norm_sqr();
            }
        }
        if den == 0.0 {
            return Err(Error::Domain(
                "commutator constant needs nonzero interior data".into(),
            ));
        }
        Ok(num / den)
    }

    fn commutator_defect_rows(&self) -> Result<Vec<Vec<Complex64>>> {
        let lg = self.apply_time_generator()?.apply_time_label();
        let gl = self.apply_time_label().apply_time_generator()?;
        let ih = Complex64::new(0.0, self.hbar);
        Ok((0..self.n_nodes())
            .map(|k| {
                (0..self.values[k].len())
                    .map(|i| lg.values[k][i] - gl.values[k][i] + ih * self.values[k][i])
                    .collect()
            })
            .collect())
    }
}

/// Max weighted row norm, over interior nodes, of the generator applied to a
/// trajectory minus the Hamiltonian applied slicewise. Interior rows repeat
/// the equation-of-motion defect arithmetic exactly.
pub fn generator_defect(traj: &Trajectory) -> Result<(f64, f64)> {
    let sf = SpacetimeFunction::from_trajectory(traj);
    let gen = sf.apply_time_generator()?;
    let n = sf.n_nodes();
    let w = sf.weight;
    let mut interior = 0.0_f64;
    let mut overall = 0.0_f64;
    for k in 0..n {
        let hpsi = traj.hamiltonian().apply(traj.state(k))?;
        let norm = (gen.values[k]
            .iter()
            .zip(hpsi.amplitudes())
            .map(|(g, h)| (g - h).norm_sqr())
            .sum::<f64>()
            * w)
            .sqrt();
        overall = overall.max(norm);
        if k != 0 && k != n - 1 {
            interior = interior.max(norm);
        }
    }
    Ok((interior, overall))
}

/// How the time axis is closed when the generator is built as a matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeClosure {
    /// Second-order one-sided stencils at the two ends.
    OneSided,
    /// Wrap-around centered stencils.
    Periodic,
}

/// Self-adjointness defects of the time-label and generator matrices under
/// a declared quadrature inner product on the time axis.
#[derive(Clone, Copy, Debug)]
pub struct HermiticityReport {
    /// Always zero: the label matrix is real diagonal.
    pub time_label_asymmetry: f64,
    pub generator_asymmetry: f64,
    /// Entries touching the first or last node.
    pub generator_boundary_asymmetry: f64,
    pub generator_interior_asymmetry: f64,
}

/// Build the time-label and generator matrices on a uniform time axis and
/// measure their defect from self-adjointness under the weighted inner
/// product sum of w_k conj(u_k) v_k. The label is exactly symmetric; the
/// generator's defect concentrates where the closure breaks the centered
/// stencil's antisymmetry, which this report localizes but does not judge.
pub fn hermiticity_probe(
    times: &[f64],
    weights: &[f64],
    closure: TimeClosure,
    hbar: f64,
) -> Result<HermiticityReport> {
    let n = times.len();
    if n < 3 {
        return Err(Error::Domain(
            "the probe needs at least three time nodes".into(),
        ));
    }
    if weights.len() != n {
        return Err(Error::Domain(format!(
            "need one weight per node, got {} weights for {n} nodes",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Domain("weights must be positive".into()));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Domain("time nodes must be uniformly spaced".into()));
        }
    }

    let mut d = DMatrix::<Complex64>::zeros(n, n);
    let c = Complex64::new(1.0 / (2.0 * dt), 0.0);
    for k in 1..n - 1 {
        d[(k, k - 1)] = -c;
        d[(k, k + 1)] = c;
    }
    match closure {
        TimeClosure::OneSided => {
            d[(0, 0)] = -3.0 * c;
            d[(0, 1)] = 4.0 * c;
            d[(0, 2)] = -c;
            d[(n - 1, n - 1)] = 3.0 * c;
            d[(n - 1, n - 2)] = -4.0 * c;
            d[(n - 1, n - 3)] = c;
        }
        TimeClosure::Periodic => {
            d[(0, n - 1)] = -c;
            d[(0, 1)] = c;
            d[(n - 1, n - 2)] = -c;
            d[(n - 1, 0)] = c;
        }
    }
    let g = d * Complex64::new(0.0, hbar);

    let asym = |m: &DMatrix<Complex64>| -> (f64, f64, f64) {
        let (mut all, mut boundary, mut interior) = (0.0_f64, 0.0_f64, 0.0_f64);
        for j in 0..n {
            for k in 0..n {
                let adj = m[(k, j)].conj() * (weights[k] / weights[j]);
                let defect = (m[(j, k)] - adj).norm();
                all = all.max(defect);
                if j == 0 || j == n - 1 || k == 0 || k == n - 1 {
                    boundary = boundary.max(defect);
                } else {
                    interior = interior.max(defect);
                }
            }
        }
        (all, boundary, interior)
    };

    let mut label = DMatrix::<Complex64>::zeros(n, n);
    for (k, t) in times.iter().enumerate() {
        label[(k, k)] = Complex64::new(*t, 0.0);
    }
    let (label_all, _, _) = asym(&label);
    let (g_all, g_boundary, g_interior) = asym(&g);
    Ok(HermiticityReport {
        time_label_asymmetry: label_all,
        generator_asymmetry: g_all,
        generator_boundary_asymmetry: g_boundary,
        generator_interior_asymmetry: g_interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::pauli_x;
    use crate::propagate::{evolve_exact, schrodinger_residual, TimeGrid};
    use crate::state::{Representation, StateVector};
    use crate::LinearOperator;
    use approx::assert_relative_eq;

    fn rows_from(n: usize, dt: f64, f: impl Fn(f64) -> Complex64) -> SpacetimeFunction {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let profile = [Complex64::new(0.6, 0.0), Complex64::new(0.0, -0.8)];
        let values = times
            .iter()
            .map(|&t| profile.iter().map(|p| p * f(t)).collect())
            .collect();
        SpacetimeFunction::new(times, values, 1.0, 1.0).unwrap()
    }

    #[test]
    fn time_label_scales_rows_exactly() {
        let sf = rows_from(9, 0.25, |t| Complex64::new(t.cos(), t.sin()));
        let labeled = sf.apply_time_label();
        let twice = labeled.apply_time_label();
        for k in 0..9 {
            let t = sf.times()[k];
            for i in 0..2 {
                assert_eq!(labeled.rows()[k][i], sf.rows()[k][i] * t);
                assert_eq!(twice.rows()[k][i], sf.rows()[k][i] * t * t);
            }
            if k > 0 {
                assert_relative_eq!(
                    sf.slice_time_expectation(k).unwrap(),
                    t,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn time_label_commutes_with_slicewise_spatial_operators() {
        let op = pauli_x();
        let sf = rows_from(7, 0.1, |t| Complex64::new((-t).exp(), 0.2 * t));
        let apply_slicewise = |s: &SpacetimeFunction| -> Vec<Vec<Complex64>> {
            s.rows()
                .iter()
                .map(|row| {
                    let st =
                        StateVector::new(Representation::FiniteDim(2), row.clone()).unwrap();
                    op.apply(&st).unwrap().amplitudes().to_vec()
                })
                .collect()
        };
        let label_then_op = apply_slicewise(&sf.apply_time_label());
        let op_then_label: Vec<Vec<Complex64>> = {
            let applied = SpacetimeFunction::new(
                sf.times().to_vec(),
                apply_slicewise(&sf),
                1.0,
                1.0,
            )
            .unwrap();
            applied.apply_time_label().rows().to_vec()
        };
        assert_eq!(label_then_op, op_then_label);
    }

    #[test]
    fn generator_recovers_a_stationary_energy() {
        let e = 1.3;
        let make = |n: usize| {
            rows_from(n, 2.0 / (n - 1) as f64, |t| {
                Complex64::new(0.0, -e * t).exp()
            })
        };
        let defect = |sf: &SpacetimeFunction| {
            let gen = sf.apply_time_generator().unwrap();
            let mut worst = 0.0_f64;
            for k in 1..sf.n_nodes() - 1 {
                let d: f64 = gen.rows()[k]
                    .iter()
                    .zip(&sf.rows()[k])
                    .map(|(g, v)| (g - v * e).norm_sqr())
                    .sum();
                worst = worst.max(d.sqrt());
            }
            worst
        };
        let coarse = defect(&make(101));
        let fine = defect(&make(201));
        assert!(coarse < 1e-3, "coarse defect {coarse}");
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn generator_of_constant_rows_vanishes_everywhere() {
        let sf = rows_from(11, 0.5, |_| Complex64::new(1.0, -0.3));
        let gen = sf.apply_time_generator().unwrap();
        for row in gen.rows() {
            for v in row {
                assert!(v.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn generator_agrees_with_the_hamiltonian_on_a_trajectory() {
        let h = LinearOperator::dense_hermitian(
            pauli_x()
                .to_dense(&Representation::FiniteDim(2))
                .unwrap()
                * Complex64::new(0.5, 0.0),
        )
        .unwrap();
        let psi0 = StateVector::finite_state(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let traj =
            evolve_exact(&psi0, &h, &TimeGrid::new(2.0, 200).unwrap(), 1.0).unwrap();
        let (interior, overall) = generator_defect(&traj).unwrap();
        let residual = schrodinger_residual(&traj).unwrap();
        assert!((interior - residual).abs() < 1e-12 * residual.max(1.0));
        assert!(overall <= 5.0 * interior + 1e-12, "{overall} vs {interior}");
    }

    #[test]
    fn commutator_residual_is_second_order_and_measures_minus_i_hbar() {
        for hbar in [1.0, 2.5] {
            let make = |n: usize| {
                let times: Vec<f64> = (0..n).map(|k| k as f64 * (1.0 / (n - 1) as f64)).collect();
                let values = times
                    .iter()
                    .map(|&t| vec![Complex64::new((-t).exp(), 0.0)])
                    .collect();
                SpacetimeFunction::new(times, values, 1.0, hbar).unwrap()
            };
            let coarse = make(101).commutator_residual().unwrap();
            let fine = make(201).commutator_residual().unwrap();
            let ratio = coarse / fine;
            assert!((3.5..=4.5).contains(&ratio), "hbar={hbar}: ratio {ratio}");

            let c = make(201).commutator_constant().unwrap();
            assert!(
                (c.norm() - hbar).abs() < 1e-4,
                "hbar={hbar}: |c| = {}",
                c.norm()
            );
            // The measured sign under this generator convention: -i hbar.
            assert!(c.im < 0.0);
            assert!(c.re.abs() < 1e-12);
        }
    }

    #[test]
    fn commutator_residual_vanishes_for_time_constant_rows() {
        let sf = rows_from(21, 0.05, |_| Complex64::new(0.7, 0.1));
        assert!(sf.commutator_residual().unwrap() < 1e-15);
        let c = sf.commutator_constant().unwrap();
        assert_relative_eq!(c.im, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn probe_finds_the_label_symmetric_and_localizes_generator_defects() {
        let n = 64;
        let dt = 0.05;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let uniform = vec![dt; n];

        let periodic =
            hermiticity_probe(&times, &uniform, TimeClosure::Periodic, 1.0).unwrap();
        assert_eq!(periodic.time_label_asymmetry, 0.0);
        assert!(periodic.generator_asymmetry < 1e-12);

        let one_sided =
            hermiticity_probe(&times, &uniform, TimeClosure::OneSided, 1.0).unwrap();
        assert_eq!(one_sided.time_label_asymmetry, 0.0);
        assert!(one_sided.generator_interior_asymmetry < 1e-12);
        // One-sided ends break antisymmetry at the 1/dt scale.
        assert!(one_sided.generator_boundary_asymmetry > 0.5 / dt);
        assert_eq!(
            one_sided.generator_asymmetry,
            one_sided.generator_boundary_asymmetry
        );
    }

    #[test]
    fn degenerate_inputs_are_refused() {
        let sf = rows_from(2, 0.1, |t| Complex64::new(t, 0.0));
        assert!(sf.apply_time_generator().is_err());
        assert!(SpacetimeFunction::new(
            vec![0.0, 0.1, 0.3],
            vec![vec![Complex64::new(1.0, 0.0)]; 3],
            1.0,
            1.0
        )
        .is_err());
        let times: Vec<f64> = (0..4).map(|k| k as f64 * 0.1).collect();
        assert!(hermiticity_probe(&times, &[0.1; 3], TimeClosure::Periodic, 1.0).is_err());
        assert!(hermiticity_probe(&times[..2], &[0.1; 2], TimeClosure::Periodic, 1.0).is_err());
    }
}
