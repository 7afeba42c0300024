//! Monte Carlo realization of the measurement process: draw a readout time
//! from its density, then an outcome from the state at that instant.
//!
//! Each record's randomness derives only from (seed, record index) through a
//! splittable counter-based stream, so a record set is reproducible
//! byte-for-byte regardless of scheduling or batch size.

use crate::collapse::CollapseDistribution;
use crate::error::{Error, Result};
use crate::propagate::Trajectory;
use crate::state::Representation;
use crate::textio::sig17;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt::Write as _;

/// What a single measurement returned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    /// A position readout on a spatial grid.
    Position(f64),
    /// A basis-index readout in a finite-dimensional system.
    BasisIndex(usize),
}

impl Outcome {
    pub fn value(&self) -> f64 {
        match self {
            Outcome::Position(x) => *x,
            Outcome::BasisIndex(i) => *i as f64,
        }
    }
}

/// One simulated measurement: when it happened and what it returned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub record_id: u64,
    pub t: f64,
    pub outcome: Outcome,
}

fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Cumulative outcome weights for one trajectory slice.
fn slice_cumulative(traj: &Trajectory, k: usize) -> Vec<f64> {
    let weight = traj.repr().weight();
    let mut acc = 0.0;
    traj.state(k)
        .amplitudes()
        .iter()
        .map(|a| {
            acc += a.norm_sqr() * weight;
            acc
        })
        .collect()
}

/// Draw n independent measurement records: a readout time from the
/// distribution, then an outcome from the slice nearest that time, by
/// inverse transform over the slice's probability weights.
pub fn sample_measurements(
    traj: &Trajectory,
    dist: &CollapseDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    if n < 1 {
        return Err(Error::Domain("need at least one record".into()));
    }
    crate::smear::check_coverage(traj, dist)?;
    let is_grid = matches!(traj.repr(), Representation::Grid(_));
    let mut cumulative: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = record_rng(seed, i as u64);
        let t = dist.sample(&mut rng, 1)?[0];
        let k = traj.time_grid().nearest_node(t)?;
        let cum = cumulative
            .entry(k)
            .or_insert_with(|| slice_cumulative(traj, k));
        let total = *cum.last().expect("states are nonempty");
        let u = rng.gen::<f64>() * total;
        let j = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
        let outcome = if is_grid {
            let grid = traj.repr().grid().expect("grid representation");
            Outcome::Position(grid.position(j))
        } else {
            Outcome::BasisIndex(j)
        };
        records.push(MeasurementRecord {
            record_id: i as u64,
            t,
            outcome,
        });
    }
    Ok(records)
}

/// A normalized 2D histogram of records over (time, outcome value).
/// Bin masses are counts over n, so the total mass is exactly one.
#[derive(Clone, Debug)]
pub struct JointHistogram {
    t_edges: Vec<f64>,
    x_edges: Vec<f64>,
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl JointHistogram {
    pub fn t_edges(&self) -> &[f64] {
        &self.t_edges
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.x_edges
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_records(&self) -> u64 {
        self.n
    }

    /// Mass in bin (time index, outcome index).
    pub fn mass(&self, ti: usize, xi: usize) -> f64 {
        self.counts[ti][xi] as f64 / self.n as f64
    }

    pub fn total_mass(&self) -> f64 {
        let total: u64 = self.counts.iter().flatten().sum();
        total as f64 / self.n as f64
    }
}

fn bin_index(edges: &[f64], value: f64) -> usize {
    let bins = edges.len() - 1;
    if value <= edges[0] {
        return 0;
    }
    if value >= edges[bins] {
        return bins - 1;
    }
    edges.partition_point(|e| *e <= value).min(bins) - 1
}

fn linspace_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    (0..=bins).map(|b| lo + span * b as f64 / bins as f64).collect()
}

/// Histogram with explicit bin edges; values outside the edge range clamp
/// into the first or last bin.
pub fn histogram_with_edges(
    records: &[MeasurementRecord],
    t_edges: Vec<f64>,
    x_edges: Vec<f64>,
) -> Result<JointHistogram> {
    if records.is_empty() {
        return Err(Error::Domain("no records to histogram".into()));
    }
    for edges in [&t_edges, &x_edges] {
        if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "bin edges must be strictly increasing with at least one bin".into(),
            ));
        }
    }
    let mut counts = vec![vec![0_u64; x_edges.len() - 1]; t_edges.len() - 1];
    for r in records {
        counts[bin_index(&t_edges, r.t)][bin_index(&x_edges, r.outcome.value())] += 1;
    }
    Ok(JointHistogram {
        t_edges,
        x_edges,
        counts,
        n: records.len() as u64,
    })
}

/// Histogram over equal-width bins spanning the records' own (t, outcome)
/// range, at least four bins per axis.
pub fn empirical_joint_histogram(
    records: &[MeasurementRecord],
    bins: usize,
) -> Result<JointHistogram> {
    if records.is_empty() {
        return Err(Error::Domain("no records to histogram".into()));
    }
    if bins < 4 {
        return Err(Error::Domain(format!(
            "need at least 4 bins per axis, got {bins}"
        )));
    }
    let (mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        t_lo = t_lo.min(r.t);
        t_hi = t_hi.max(r.t);
        let v = r.outcome.value();
        x_lo = x_lo.min(v);
        x_hi = x_hi.max(v);
    }
    histogram_with_edges(
        records,
        linspace_edges(t_lo, t_hi, bins),
        linspace_edges(x_lo, x_hi, bins),
    )
}

/// Records as CSV with columns record_id, t, outcome. Positions print with
/// 17 significant digits; basis indices print as integers.
pub fn records_to_csv(records: &[MeasurementRecord]) -> String {
    let mut out = String::from("record_id,t,outcome\n");
    for r in records {
        let outcome = match r.outcome {
            Outcome::Position(x) => sig17(x),
            Outcome::BasisIndex(i) => i.to_string(),
        };
        let _ = writeln!(out, "{},{},{}", r.record_id, sig17(r.t), outcome);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::CollapseDistribution;
    use crate::grid::SpatialGrid;
    use crate::operator::{build_hamiltonian, pauli_x, LinearOperator};
    use crate::propagate::{evolve_exact, evolve_split_operator, TimeGrid};
    use crate::smear::smeared_expectation;
    use crate::state::StateVector;
    use crate::stats::{chi_square_gof, ks_critical_1pct, ks_statistic, mean_and_standard_error};
    use num_complex::Complex64;

    /// Position-diagonal Hamiltonian: densities stay frozen while phases
    /// rotate, giving an exactly known spatial law at every node.
    fn stationary_density_traj(t_max: f64, n_steps: usize) -> Trajectory {
        let grid = SpatialGrid::new(-16.0, 16.0, 256).unwrap();
        let h = LinearOperator::diagonal_in_position(
            grid.positions().iter().map(|x| 0.3 * x * x).collect(),
        )
        .unwrap();
        let psi0 = StateVector::gaussian(grid, 0.0, 0.0, 1.0, 1.0).unwrap();
        evolve_split_operator(&psi0, &h, &TimeGrid::new(t_max, n_steps).unwrap(), 1.0).unwrap()
    }

    fn rabi_traj(t_max: f64, n_steps: usize) -> Trajectory {
        let h = LinearOperator::dense_hermitian(
            pauli_x().to_dense(&crate::state::Representation::FiniteDim(2)).unwrap()
                * Complex64::new(0.5, 0.0),
        )
        .unwrap();
        let psi0 = StateVector::finite_state(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        evolve_exact(&psi0, &h, &TimeGrid::new(t_max, n_steps).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn sharp_time_position_mean_is_centered() {
        let traj = stationary_density_traj(2.0, 100);
        let dist = CollapseDistribution::delta(1.0).unwrap();
        let n = 100_000;
        let records = sample_measurements(&traj, &dist, n, 11).unwrap();
        let xs: Vec<f64> = records.iter().map(|r| r.outcome.value()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Density std is 1, so the sample mean should sit within 3 sigma/sqrt(n).
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
        for r in &records {
            assert_eq!(r.t, 1.0);
        }
    }

    #[test]
    fn qubit_outcome_mean_matches_the_smeared_expectation() {
        let traj = rabi_traj(30.0, 3000);
        let dist = CollapseDistribution::exponential(1.0, 0.0, 30.0).unwrap();
        let n = 100_000;
        let records = sample_measurements(&traj, &dist, n, 5).unwrap();

        let sz: Vec<f64> = records
            .iter()
            .map(|r| match r.outcome {
                Outcome::BasisIndex(i) => 1.0 - 2.0 * i as f64,
                Outcome::Position(_) => unreachable!(),
            })
            .collect();
        let (mean, se) = mean_and_standard_error(&sz).unwrap();
        let smeared = smeared_expectation(&traj, &dist, &crate::operator::pauli_z())
            .unwrap()
            .value;
        assert!(
            (mean - smeared).abs() < 4.0 * se,
            "mean {mean} vs smeared {smeared} (se {se})"
        );

        // The drawn times follow the readout-time law.
        let times: Vec<f64> = records.iter().map(|r| r.t).collect();
        let ks = ks_statistic(&times, |t| dist.cdf(t));
        assert!(ks < ks_critical_1pct(n), "ks {ks}");
    }

    #[test]
    fn joint_counts_match_the_node_level_law() {
        let grid = SpatialGrid::new(-32.0, 96.0, 512).unwrap();
        let h = build_hamiltonian(&grid, |_| 0.0, 1.0, 1.0).unwrap();
        let psi0 = StateVector::gaussian(grid, 0.0, 2.0, 1.0, 1.0).unwrap();
        let tg = TimeGrid::new(2.0, 800).unwrap();
        let traj = evolve_split_operator(&psi0, &h, &tg, 1.0).unwrap();
        let dist = CollapseDistribution::uniform(0.0, 2.0, 2.0).unwrap();
        let n = 100_000;
        let records = sample_measurements(&traj, &dist, n, 23).unwrap();

        // Node-snapped bins: 8 time bins over nodes, 8 index bins over the grid.
        let bins = 8;
        let n_nodes = tg.n_nodes();
        let node_bin = |k: usize| (k * bins / n_nodes).min(bins - 1);
        let index_bin = |j: usize| (j * bins / 512).min(bins - 1);
        let mut observed = vec![0.0_f64; bins * bins];
        for r in &records {
            let k = tg.nearest_node(r.t).unwrap();
            let j = grid.nearest_index(r.outcome.value()).unwrap();
            observed[node_bin(k) * bins + index_bin(j)] += 1.0;
        }

        // Expected mass: readout-time mass of each node's nearest-neighbor
        // cell times the slice's discrete spatial weights.
        let dt = tg.dt();
        let mut expected = vec![0.0_f64; bins * bins];
        for k in 0..n_nodes {
            let lo = (tg.node(k) - 0.5 * dt).max(0.0);
            let hi = (tg.node(k) + 0.5 * dt).min(tg.t_max());
            let t_mass = dist.cdf(hi) - dist.cdf(lo);
            if t_mass == 0.0 {
                continue;
            }
            let cum = slice_cumulative(&traj, k);
            let total = *cum.last().unwrap();
            let mut prev = 0.0;
            let mut per_bin = vec![0.0_f64; bins];
            for (j, c) in cum.iter().enumerate() {
                per_bin[index_bin(j)] += c - prev;
                prev = *c;
            }
            for (b, m) in per_bin.iter().enumerate() {
                expected[node_bin(k) * bins + b] += t_mass * m / total * n as f64;
            }
        }

        let test = chi_square_gof(&observed, &expected, 0.01, 5.0).unwrap();
        assert!(
            !test.rejected,
            "chi-square {} > {} (dof {})",
            test.statistic, test.critical, test.dof
        );
    }

    #[test]
    fn conditional_outcomes_at_one_node_follow_the_slice_density() {
        let traj = stationary_density_traj(2.0, 200);
        let dist = CollapseDistribution::uniform(0.0, 2.0, 2.0).unwrap();
        let n = 100_000;
        let records = sample_measurements(&traj, &dist, n, 3).unwrap();
        let tg = traj.time_grid();
        let k_star = 100;
        let grid = traj.repr().grid().unwrap();

        let mut observed = vec![0.0_f64; 256];
        let mut picked = 0.0;
        for r in &records {
            if tg.nearest_node(r.t).unwrap() == k_star {
                observed[grid.nearest_index(r.outcome.value()).unwrap()] += 1.0;
                picked += 1.0;
            }
        }
        assert!(picked > 300.0, "picked {picked}");
        let cum = slice_cumulative(&traj, k_star);
        let total = *cum.last().unwrap();
        let mut prev = 0.0;
        let expected: Vec<f64> = cum
            .iter()
            .map(|c| {
                let m = (c - prev) / total * picked;
                prev = *c;
                m
            })
            .collect();
        let test = chi_square_gof(&observed, &expected, 0.01, 5.0).unwrap();
        assert!(!test.rejected, "chi-square {}", test.statistic);
    }

    #[test]
    fn identical_seeds_reproduce_records_byte_for_byte() {
        let traj = rabi_traj(2.0, 50);
        let dist = CollapseDistribution::uniform(0.0, 2.0, 2.0).unwrap();
        let a = sample_measurements(&traj, &dist, 500, 42).unwrap();
        let b = sample_measurements(&traj, &dist, 500, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(records_to_csv(&a), records_to_csv(&b));

        // Streams are per record: growing the batch keeps earlier records.
        let longer = sample_measurements(&traj, &dist, 800, 42).unwrap();
        assert_eq!(&longer[..500], &a[..]);

        let other = sample_measurements(&traj, &dist, 500, 43).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn single_record_histogram_holds_all_mass_in_one_bin() {
        let records = vec![MeasurementRecord {
            record_id: 0,
            t: 0.7,
            outcome: Outcome::Position(-1.2),
        }];
        let h = empirical_joint_histogram(&records, 4).unwrap();
        assert_eq!(h.total_mass(), 1.0);
        let flat: Vec<f64> = (0..4)
            .flat_map(|ti| (0..4).map(move |xi| (ti, xi)))
            .map(|(ti, xi)| h.mass(ti, xi))
            .collect();
        assert_eq!(flat.iter().filter(|m| **m == 1.0).count(), 1);
        assert_eq!(flat.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn synthetic_uniform_records_give_a_flat_histogram() {
        use rand::Rng;
        let mut rng = record_rng(9, 0);
        let n = 40_000;
        let records: Vec<MeasurementRecord> = (0..n)
            .map(|i| MeasurementRecord {
                record_id: i as u64,
                t: rng.gen::<f64>(),
                outcome: Outcome::Position(rng.gen::<f64>()),
            })
            .collect();
        let bins = 5;
        let h = histogram_with_edges(
            &records,
            linspace_edges(0.0, 1.0, bins),
            linspace_edges(0.0, 1.0, bins),
        )
        .unwrap();
        assert_eq!(h.total_mass(), 1.0);
        let p = 1.0 / (bins * bins) as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for ti in 0..bins {
            for xi in 0..bins {
                let dev = (h.mass(ti, xi) - p).abs();
                assert!(dev < 4.0 * sigma, "bin ({ti},{xi}) deviates {dev}");
            }
        }
    }

    #[test]
    fn quadrupling_the_sample_halves_the_histogram_error() {
        let traj = stationary_density_traj(2.0, 100);
        let dist = CollapseDistribution::uniform(0.0, 2.0, 2.0).unwrap();
        let bins = 8;
        let t_edges = linspace_edges(0.0, 2.0, bins);
        let x_edges = linspace_edges(-6.0, 6.0, bins);

        // Separable truth: uniform time mass times the discrete spatial law
        // outcomes are actually drawn from (identical in every slice here).
        let grid = *traj.repr().grid().unwrap();
        let cum = slice_cumulative(&traj, 0);
        let total = *cum.last().unwrap();
        let mut spatial = vec![0.0_f64; bins];
        let mut prev = 0.0;
        for (j, c) in cum.iter().enumerate() {
            spatial[bin_index(&x_edges, grid.position(j))] += (c - prev) / total;
            prev = *c;
        }
        let expected: Vec<Vec<f64>> = (0..bins)
            .map(|_| spatial.iter().map(|m| m / bins as f64).collect())
            .collect();
        let rms = |n: usize, seed: u64| -> f64 {
            let records = sample_measurements(&traj, &dist, n, seed).unwrap();
            let h = histogram_with_edges(&records, t_edges.clone(), x_edges.clone()).unwrap();
            let mut acc = 0.0;
            for (ti, row) in expected.iter().enumerate() {
                for (xi, e) in row.iter().enumerate() {
                    acc += (h.mass(ti, xi) - e).powi(2);
                }
            }
            (acc / (bins * bins) as f64).sqrt()
        };
        let ratio = rms(20_000, 17) / rms(80_000, 18);
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn csv_is_well_formed_for_both_outcome_kinds() {
        let records = vec![
            MeasurementRecord {
                record_id: 0,
                t: 0.5,
                outcome: Outcome::Position(1.25),
            },
            MeasurementRecord {
                record_id: 1,
                t: 1.5,
                outcome: Outcome::BasisIndex(1),
            },
        ];
        let csv = records_to_csv(&records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "record_id,t,outcome");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[1].ends_with(&sig17(1.25)));
        assert!(lines[2].ends_with(",1"));
    }

    #[test]
    fn degenerate_requests_are_refused() {
        let traj = rabi_traj(2.0, 50);
        let dist = CollapseDistribution::uniform(0.0, 2.0, 2.0).unwrap();
        assert!(sample_measurements(&traj, &dist, 0, 1).is_err());
        let wide = CollapseDistribution::uniform(0.0, 4.0, 4.0).unwrap();
        assert!(matches!(
            sample_measurements(&traj, &wide, 10, 1),
            Err(Error::Coverage(_))
        ));
        let records = sample_measurements(&traj, &dist, 10, 1).unwrap();
        assert!(empirical_joint_histogram(&records, 3).is_err());
        assert!(empirical_joint_histogram(&[], 4).is_err());
        // Outcomes stay within bounds and times within the window.
        for r in &records {
            assert!(r.t >= 0.0 && r.t <= 2.0);
            assert!(matches!(r.outcome, Outcome::BasisIndex(0 | 1)));
        }
    }
}
