//! The joint space-time measurement density p(x, t) = f(t) |psi(x, t)|^2
//! and its two Bayesian factorizations.
//!
//! Rows live on the trajectory's time nodes, columns on the spatial grid.
//! Integrals over time use the same composite Simpson weights as the rest of
//! the crate; integrals over space use the uniform grid measure dx. The
//! conditional densities are exact quotients of the stored joint and its
//! cached marginals, so reconstructing the joint from either factorization
//! is an algebraic identity up to one division/multiplication round trip.

use crate::collapse::CollapseDistribution;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::propagate::Trajectory;
use crate::quad::simpson_weights;
use crate::state::Representation;
use crate::textio::sig17;
use crate::tolerances;
use std::io::{self, Read, Write};

/// Discretized joint density of measurement position and readout time.
#[derive(Clone, Debug)]
pub struct JointDensity {
    grid: SpatialGrid,
    times: Vec<f64>,
    dt: f64,
    time_weights: Vec<f64>,
    /// p[k][i] = f(t_k) |psi(x_i, t_k)|^2, time-major.
    p: Vec<Vec<f64>>,
    /// Marginal over x at each time node; equals f(t_k) up to norm drift.
    time_marginal: Vec<f64>,
    /// Marginal over t at each grid point: g(x_i).
    spatial_marginal: Vec<f64>,
}

/// Reconstruction residual between the two Bayesian factorizations.
#[derive(Clone, Copy, Debug)]
pub struct BayesReport {
    pub max_residual: f64,
    pub entries_checked: usize,
    /// Columns whose spatial marginal sat below the conditional floor.
    pub columns_skipped: usize,
    /// Rows with zero readout density (no mass to factorize).
    pub rows_skipped: usize,
}

/// Joint density from a grid trajectory and a quadrature readout density.
pub fn joint_density(traj: &Trajectory, dist: &CollapseDistribution) -> Result<JointDensity> {
    joint_density_parallel(traj, dist, 1)
}

/// Same construction with rows split across worker threads. Every thread
/// writes disjoint rows and the reduction order is fixed, so the result is
/// identical for any thread count.
pub fn joint_density_parallel(
    traj: &Trajectory,
    dist: &CollapseDistribution,
    n_threads: usize,
) -> Result<JointDensity> {
    let Representation::Grid(grid) = *traj.repr() else {
        return Err(Error::RepresentationMismatch(
            "the joint space-time density is positional; finite-dimensional \
             trajectories have no spatial axis"
                .into(),
        ));
    };
    if dist.is_delta() {
        return Err(Error::Variant(
            "a sharp readout time collapses the joint density to a single \
             spatial slice; use delta_spatial_density instead"
                .into(),
        ));
    }
    crate::smear::check_coverage(traj, dist)?;

    let n_nodes = traj.time_grid().n_nodes();
    let dt = traj.time_grid().dt();
    let times = traj.time_grid().nodes();
    let f: Vec<f64> = times.iter().map(|&t| dist.pdf_clamped(t)).collect();

    let mut p: Vec<Vec<f64>> = vec![Vec::new(); n_nodes];
    let workers = n_threads.max(1).min(n_nodes);
    let chunk = n_nodes.div_ceil(workers);
    std::thread::scope(|scope| {
        for (c, rows) in p.chunks_mut(chunk).enumerate() {
            let f = &f;
            let start = c * chunk;
            scope.spawn(move || {
                for (off, row) in rows.iter_mut().enumerate() {
                    let k = start + off;
                    *row = traj
                        .state(k)
                        .amplitudes()
                        .iter()
                        .map(|a| a.norm_sqr() * f[k])
                        .collect();
                }
            });
        }
    });

    let time_weights = simpson_weights(n_nodes, dt);
    let dx = grid.dx();
    let n_x = grid.n_points();
    let mut spatial_marginal = vec![0.0; n_x];
    let mut time_marginal = vec![0.0; n_nodes];
    for k in 0..n_nodes {
        let w = time_weights[k];
        let mut slice_mass = 0.0;
        for i in 0..n_x {
            let v = p[k][i];
            spatial_marginal[i] += w * v;
            slice_mass += v * dx;
        }
        time_marginal[k] = slice_mass;
    }

    Ok(JointDensity {
        grid,
        times,
        dt,
        time_weights,
        p,
        time_marginal,
        spatial_marginal,
    })
}

/// The spatial density under a sharp readout time: |psi(x, t')|^2 with the
/// bracketing slices blended linearly. Blending the densities rather than
/// the amplitudes keeps the result exactly normalized.
pub fn delta_spatial_density(traj: &Trajectory, t_prime: f64) -> Result<Vec<f64>> {
    let Representation::Grid(_) = *traj.repr() else {
        return Err(Error::RepresentationMismatch(
            "the spatial density needs a grid trajectory".into(),
        ));
    };
    let (k, frac) = traj.time_grid().bracket(t_prime)?;
    let a = traj.state(k).amplitudes();
    let b = traj.state(k + 1).amplitudes();
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - frac) * x.norm_sqr() + frac * y.norm_sqr())
        .collect())
}

impl JointDensity {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    /// Time-major density matrix p[k][i].
    pub fn values(&self) -> &[Vec<f64>] {
        &self.p
    }

    /// Simpson weights paired with the time nodes.
    pub fn time_weights(&self) -> &[f64] {
        &self.time_weights
    }

    /// Marginal over x per time node; recovers f(t_k).
    pub fn time_marginal(&self) -> &[f64] {
        &self.time_marginal
    }

    /// Marginal over t per grid point: g(x_i).
    pub fn spatial_marginal(&self) -> &[f64] {
        &self.spatial_marginal
    }

    /// Total mass under the product quadrature; one up to discretization.
    pub fn normalization(&self) -> f64 {
        self.spatial_marginal.iter().sum::<f64>() * self.grid.dx()
    }

    /// Max over time nodes of |slice mass - f(t_k)|.
    pub fn slice_marginal_max_residual(&self, dist: &CollapseDistribution) -> f64 {
        self.times
            .iter()
            .zip(&self.time_marginal)
            .map(|(&t, &m)| (m - dist.pdf_clamped(t)).abs())
            .fold(0.0, f64::max)
    }

    /// Readout-time density conditioned on measuring at position x (nearest
    /// grid point). Errors when the spatial marginal at x carries no mass:
    /// conditioning on a zero-probability outcome is undefined.
    pub fn conditional_time_density(&self, x: f64) -> Result<Vec<f64>> {
        let i = self.grid.nearest_index(x)?;
        let g = self.spatial_marginal[i];
        if g < tolerances::CONDITIONAL_FLOOR {
            return Err(Error::UndefinedConditional(format!(
                "the spatial marginal at x = {x} is {g:.3e}, below the floor \
                 {:.1e}; conditioning there is undefined",
                tolerances::CONDITIONAL_FLOOR
            )));
        }
        Ok(self.p.iter().map(|row| row[i] / g).collect())
    }

    /// Position density conditioned on the readout happening at node k:
    /// p[k][i] / f(t_k), which is |psi(x_i, t_k)|^2 exactly.
    pub fn conditional_position_density(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.times.len() {
            return Err(Error::Domain(format!(
                "time node {k} outside the {} stored slices",
                self.times.len()
            )));
        }
        let f = self.time_marginal[k];
        if f < tolerances::CONDITIONAL_FLOOR {
            return Err(Error::UndefinedConditional(format!(
                "the readout density at node {k} carries no mass; the \
                 position conditional is undefined there"
            )));
        }
        Ok(self.p[k].iter().map(|v| v / f).collect())
    }

    /// Rebuild the joint from both factorizations, conditional times
    /// marginal each way, and report the largest discrepancy. Rows without
    /// readout mass and columns below the conditional floor are skipped:
    /// neither factorization is defined there.
    pub fn bayes_consistency(&self) -> BayesReport {
        let n_x = self.grid.n_points();
        let usable: Vec<bool> = self
            .spatial_marginal
            .iter()
            .map(|&g| g >= tolerances::CONDITIONAL_FLOOR)
            .collect();
        let columns_skipped = usable.iter().filter(|u| !**u).count();
        let mut max_residual = 0.0_f64;
        let mut entries_checked = 0;
        let mut rows_skipped = 0;
        for (k, row) in self.p.iter().enumerate() {
            let f = self.time_marginal[k];
            if f < tolerances::CONDITIONAL_FLOOR {
                rows_skipped += 1;
                continue;
            }
            for i in 0..n_x {
                if !usable[i] {
                    continue;
                }
                let g = self.spatial_marginal[i];
                let via_position = row[i] / f * f;
                let via_time = row[i] / g * g;
                max_residual = max_residual.max((via_position - via_time).abs());
                entries_checked += 1;
            }
        }
        BayesReport {
            max_residual,
            entries_checked,
            columns_skipped,
            rows_skipped,
        }
    }

    /// Stream the density as CSV with header `x,t,p`, time-major.
    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(b"x,t,p\n")?;
        let xs = self.grid.positions();
        for (k, row) in self.p.iter().enumerate() {
            let t = sig17(self.times[k]);
            for (i, v) in row.iter().enumerate() {
                writeln!(w, "{},{t},{}", sig17(xs[i]), sig17(*v))?;
            }
        }
        Ok(())
    }

    /// Dump the density as a dense binary block for plotting tools.
    pub fn write_binary(&self, w: &mut impl Write) -> io::Result<()> {
        write_block(
            w,
            JOINT_MAGIC,
            self.grid.n_points(),
            self.times.len(),
            self.grid.dx(),
            self.dt,
            self.p.iter().map(|row| row.as_slice()),
        )
    }
}

/// Magic tag for joint-density blocks.
pub const JOINT_MAGIC: [u8; 4] = *b"PXT1";
/// Magic tag for trajectory |psi|^2 blocks (same layout, different content).
pub const TRAJECTORY_MAGIC: [u8; 4] = *b"TRJ1";

/// Binary interchange block: 32-byte header (4-byte magic, u32 n_x, u32 n_t,
/// u32 reserved zero, f64 dx, f64 dt, all little-endian) followed by
/// n_t * n_x f64 values, time-major.
pub fn write_block<'a>(
    w: &mut impl Write,
    magic: [u8; 4],
    n_x: usize,
    n_t: usize,
    dx: f64,
    dt: f64,
    rows: impl Iterator<Item = &'a [f64]>,
) -> io::Result<()> {
    w.write_all(&magic)?;
    w.write_all(&(n_x as u32).to_le_bytes())?;
    w.write_all(&(n_t as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&dx.to_le_bytes())?;
    w.write_all(&dt.to_le_bytes())?;
    let mut written = 0usize;
    for row in rows {
        let mut buf = Vec::with_capacity(row.len() * 8);
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        written += 1;
    }
    debug_assert_eq!(written, n_t);
    Ok(())
}

/// A parsed binary block.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityBlock {
    pub magic: [u8; 4],
    pub n_x: usize,
    pub n_t: usize,
    pub dx: f64,
    pub dt: f64,
    /// Time-major values, length n_t * n_x.
    pub data: Vec<f64>,
}

pub fn read_block(r: &mut impl Read) -> Result<DensityBlock> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)
        .map_err(|e| Error::Domain(format!("binary block header unreadable: {e}")))?;
    let magic = [header[0], header[1], header[2], header[3]];
    let n_x = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let n_t = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let reserved = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes"));
    if reserved != 0 {
        return Err(Error::Domain(format!(
            "binary block reserved field must be zero, got {reserved}"
        )));
    }
    let dx = f64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
    let dt = f64::from_le_bytes(header[24..32].try_into().expect("8 bytes"));
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Domain(format!("binary block payload unreadable: {e}")))?;
    if bytes.len() != n_x * n_t * 8 {
        return Err(Error::Domain(format!(
            "binary block payload holds {} bytes, expected {}",
            bytes.len(),
            n_x * n_t * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DensityBlock {
        magic,
        n_x,
        n_t,
        dx,
        dt,
        data,
    })
}
