//! Command-line front end for the smeared-readout simulation library.
//!
//! Subcommands:
//!
//! * `evolve`: propagate the scenario and write per-slice densities plus a
//!   norm/energy/expectation summary;
//! * `smear`: compute one smeared expectation value with its per-slice
//!   breakdown and the density-operator cross-check;
//! * `joint`: build the joint position/readout-time density with marginals
//!   and the Bayes-consistency residual;
//! * `sample`: draw synthetic measurement records and report
//!   goodness-of-fit statistics against the analytic law;
//! * `check`: run the invariant suite and emit machine-readable
//!   `CHECK <name> PASS|FAIL <value> <tolerance>` lines.
//!
//! Exit codes: 0 success, 1 usage error, 2 scenario load or I/O failure,
//! 3 unknown observable, 4 representation mismatch, 5 failed check.
//!
//! All CSV artifacts have a fixed column order, a single header line, and
//! floats printed with 17 significant digits so a rerun with the same
//! configuration and seed is byte-identical. `CHRONOS_THREADS` caps the
//! worker count used for the joint-density rows.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use flate2::{Compression, GzBuilder};

use chronos_core::collapse::CollapseDistribution;
use chronos_core::sampler::{self, MeasurementRecord};
use chronos_core::scenario::{self, Scenario};
use chronos_core::smear::{self, SmearedState};
use chronos_core::spacetime::{self, TRAJECTORY_MAGIC};
use chronos_core::state::Representation;
use chronos_core::stats;
use chronos_core::textio::sig17;
use chronos_core::timeop::SpacetimeFunction;
use chronos_core::tolerances;
use chronos_core::{Error, Trajectory};
use num_complex::Complex64;

/// println! that ignores a closed stdout, so piping into `head` works.
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stdout(), $($arg)*);
    };
}

const EXIT_USAGE: u8 = 1;
const EXIT_LOAD: u8 = 2;
const EXIT_OBSERVABLE: u8 = 3;
const EXIT_REPRESENTATION: u8 = 4;
const EXIT_CHECK: u8 = 5;

/// CSV tables above this cell count switch to the binary (or gzip) form.
const CSV_CELL_CUTOFF: usize = 1 << 22;

/// Accepted band around the ideal residual ratio 4 when the step halves.
const COMMUTATOR_RATIO_TOL: f64 = 0.5;

/// Largest accepted ||c| - hbar| for the measured commutator constant.
const COMMUTATOR_CONSTANT_TOL: f64 = 1e-4;

/// Histogram bins per axis for the sampler goodness-of-fit test.
const GOF_BINS: usize = 8;

#[derive(Parser)]
#[command(
    name = "chronos",
    version,
    about = "Quantum evolution with a random readout time",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a scenario and write density and summary tables.
    Evolve(EvolveArgs),
    /// Smear one observable over the readout-time density.
    Smear(SmearArgs),
    /// Build the joint position/readout-time density and its marginals.
    Joint(JointArgs),
    /// Draw synthetic measurement records and test their fit.
    Sample(SampleArgs),
    /// Run the invariant suite; any failed check exits nonzero.
    Check(CheckArgs),
}

#[derive(Args)]
struct Source {
    /// Name of a built-in scenario.
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,

    /// Path to a scenario JSON file.
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,

    /// Directory the artifacts are written into (created if missing).
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Truncate or extend the simulated window to this end time.
    #[arg(long, value_name = "T")]
    tmax_override: Option<f64>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    source: Source,

    /// Observable for the summary expectation column.
    #[arg(long, value_name = "NAME")]
    observable: Option<String>,
}

#[derive(Args)]
struct SmearArgs {
    #[command(flatten)]
    source: Source,

    /// Observable to smear (defaults per representation).
    #[arg(long, value_name = "NAME")]
    observable: Option<String>,
}

#[derive(Args)]
struct JointArgs {
    #[command(flatten)]
    source: Source,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: Source,

    /// Number of measurement records to draw.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,

    /// Seed for the record stream; a fixed seed reproduces bytes exactly.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,

    /// Override a check tolerance, e.g. --tolerance omega_trace=1e-6.
    #[arg(long = "tolerance", value_name = "KEY=VAL")]
    tolerance: Vec<String>,
}

/// A terminal failure: message for stderr plus the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Map library errors onto the exit-code contract. Anything that is not an
/// observable or representation problem counts as a load/config failure.
fn core_failure(err: Error) -> Failure {
    let code = match &err {
        Error::UnknownObservable { .. } => EXIT_OBSERVABLE,
        Error::RepresentationMismatch(_) => EXIT_REPRESENTATION,
        _ => EXIT_LOAD,
    };
    Failure {
        code,
        message: err.to_string(),
    }
}

fn io_failure(path: &Path, err: std::io::Error) -> Failure {
    Failure {
        code: EXIT_LOAD,
        message: format!("writing {}: {err}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            // clap routes help to stdout and errors to stderr by itself.
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Evolve(args) => cmd_evolve(&args),
        Command::Smear(args) => cmd_smear(&args),
        Command::Joint(args) => cmd_joint(&args),
        Command::Sample(args) => cmd_sample(&args),
        Command::Check(args) => cmd_check(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// Load the scenario named by exactly one of --scenario and --file.
fn resolve_scenario(source: &Source) -> Result<Scenario, Failure> {
    match (&source.scenario, &source.file) {
        (Some(_), Some(_)) => Err(usage("--scenario and --file are mutually exclusive")),
        (None, None) => Err(usage("one of --scenario or --file is required")),
        (Some(name), None) => scenario::builtin(name).map_err(core_failure),
        (None, Some(path)) => scenario::load_scenario(path).map_err(core_failure),
    }
}

/// Scenario turned into trajectory + readout density, shared by every
/// subcommand. The trajectory sits behind an Arc so the matrix-free smeared
/// state can hold it without copying the slices.
struct Run {
    scenario: Scenario,
    traj: Arc<Trajectory>,
    dist: CollapseDistribution,
    hbar: f64,
}

fn realize(source: &Source) -> Result<Run, Failure> {
    let scenario = resolve_scenario(source)?;
    let rz = scenario
        .realize_with(source.tmax_override)
        .map_err(core_failure)?;
    Ok(Run {
        scenario,
        traj: Arc::new(rz.trajectory),
        dist: rz.collapse,
        hbar: rz.hbar,
    })
}

/// Worker count for the joint-density rows: CHRONOS_THREADS caps it, the
/// machine's parallelism is the default. The row split never changes the
/// result, only the wall time.
/// An explicit CHRONOS_THREADS is honored as given; the default only uses
/// what the machine reports, capped so wide hosts do not oversubscribe io.
fn worker_threads() -> Result<usize, Failure> {
    match std::env::var("CHRONOS_THREADS") {
        Err(_) => {
            let available = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1);
            Ok(available.min(8))
        }
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(usage(format!(
                "CHRONOS_THREADS must be a positive integer, got `{raw}`"
            ))),
        },
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

/// Gzip with a pinned zero mtime so identical content gives identical bytes.
fn write_gzip(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(|e| io_failure(path, e))?;
    let mut enc = GzBuilder::new().mtime(0).write(file, Compression::default());
    enc.write_all(bytes)
        .and_then(|_| enc.finish().map(|_| ()))
        .map_err(|e| io_failure(path, e))
}

fn cmd_evolve(args: &EvolveArgs) -> Result<(), Failure> {
    let run = realize(&args.source)?;
    let traj = &*run.traj;
    ensure_out_dir(&args.source.out)?;

    let obs_name = args
        .observable
        .clone()
        .unwrap_or_else(|| scenario::default_observable(traj.repr()));
    let op = scenario::build_observable(&obs_name, traj).map_err(core_failure)?;
    let series = traj.expectation_series(&op).map_err(core_failure)?;
    let energy = traj
        .expectation_series(traj.hamiltonian())
        .map_err(core_failure)?;
    let times = traj.time_grid().nodes();

    let mut summary = String::from("t,norm,energy,expectation\n");
    for (k, t) in times.iter().enumerate() {
        summary.push_str(&format!(
            "{},{},{},{}\n",
            sig17(*t),
            sig17(traj.state(k).norm()),
            sig17(energy[k]),
            sig17(series[k]),
        ));
    }
    let summary_path = args.source.out.join("summary.csv");
    write_text(&summary_path, &summary)?;

    let dim = traj.state(0).dim();
    let cells = traj.time_grid().n_nodes() * dim;
    let density_path = if cells <= CSV_CELL_CUTOFF {
        let path = args.source.out.join("density.csv");
        write_text(&path, &density_csv(traj))?;
        path
    } else {
        let path = args.source.out.join("density.bin");
        let rows: Vec<Vec<f64>> = traj.states().iter().map(|s| s.density()).collect();
        let cell = match traj.repr() {
            Representation::Grid(grid) => grid.dx(),
            Representation::FiniteDim(_) => 1.0,
        };
        let mut buf = Vec::new();
        spacetime::write_block(
            &mut buf,
            TRAJECTORY_MAGIC,
            dim,
            traj.time_grid().n_nodes(),
            cell,
            traj.time_grid().dt(),
            rows.iter().map(|r| r.as_slice()),
        )
        .map_err(|e| io_failure(&path, e))?;
        write_bytes(&path, &buf)?;
        path
    };

    say!("scenario {}", run.scenario.name);
    say!("state {}", traj.repr().describe());
    say!("observable {obs_name}");
    say!("norm_drift {}", sig17(traj.norm_drift()));
    say!(
        "energy_drift {}",
        sig17(traj.energy_drift().map_err(core_failure)?)
    );
    say!(
        "schrodinger_residual {}",
        sig17(chronos_core::propagate::schrodinger_residual(traj).map_err(core_failure)?)
    );
    say!("wrote {}", summary_path.display());
    say!("wrote {}", density_path.display());
    Ok(())
}

/// Per-slice density table: position scenarios get `t,x,density`,
/// finite-dimensional ones `t,index,probability` (same shape, the second
/// column is the basis index).
fn density_csv(traj: &Trajectory) -> String {
    let times = traj.time_grid().nodes();
    let mut out = String::new();
    match traj.repr() {
        Representation::Grid(grid) => {
            out.push_str("t,x,density\n");
            let xs = grid.positions();
            for (k, t) in times.iter().enumerate() {
                let t = sig17(*t);
                for (i, d) in traj.state(k).density().iter().enumerate() {
                    out.push_str(&format!("{t},{},{}\n", sig17(xs[i]), sig17(*d)));
                }
            }
        }
        Representation::FiniteDim(_) => {
            out.push_str("t,index,probability\n");
            for (k, t) in times.iter().enumerate() {
                let t = sig17(*t);
                for (i, d) in traj.state(k).density().iter().enumerate() {
                    out.push_str(&format!("{t},{i},{}\n", sig17(*d)));
                }
            }
        }
    }
    out
}

fn cmd_smear(args: &SmearArgs) -> Result<(), Failure> {
    let run = realize(&args.source)?;
    let traj = &*run.traj;
    ensure_out_dir(&args.source.out)?;

    let obs_name = args
        .observable
        .clone()
        .unwrap_or_else(|| scenario::default_observable(traj.repr()));
    let op = scenario::build_observable(&obs_name, traj).map_err(core_failure)?;
    let report = smear::smeared_expectation(traj, &run.dist, &op).map_err(core_failure)?;

    let path = args.source.out.join("smear.csv");
    write_text(&path, &report.to_csv())?;

    let omega = build_smeared_state(&run)?;
    let checks =
        smear::omega_trace_checks(&omega, traj, &run.dist, Some(&op)).map_err(core_failure)?;

    say!("scenario {}", run.scenario.name);
    say!("observable {obs_name}");
    say!("rule {}", report.rule);
    say!("smeared_expectation {}", sig17(report.value));
    say!("quadrature_error {}", sig17(report.quadrature_error));
    if let Some(tp) = checks.trace_product {
        say!("trace_product {}", sig17(tp));
    }
    if let Some(residual) = checks.identity_residual {
        say!("identity_residual {}", sig17(residual));
    }
    say!("wrote {}", path.display());
    Ok(())
}

/// Dense density operator when the dimension allows it, the trajectory-backed
/// form otherwise.
fn build_smeared_state(run: &Run) -> Result<SmearedState, Failure> {
    if run.traj.state(0).dim() <= tolerances::DENSE_OMEGA_CAP {
        smear::build_omega(&run.traj, &run.dist).map_err(core_failure)
    } else {
        smear::matrix_free(run.traj.clone(), run.dist.clone()).map_err(core_failure)
    }
}

fn cmd_joint(args: &JointArgs) -> Result<(), Failure> {
    let run = realize(&args.source)?;
    let traj = &*run.traj;
    if run.dist.is_delta() {
        return Err(usage(
            "a sharp readout time has no two-dimensional joint table; \
             use `evolve` for the slice densities or `smear` for expectations",
        ));
    }
    ensure_out_dir(&args.source.out)?;

    let threads = worker_threads()?;
    let joint =
        spacetime::joint_density_parallel(traj, &run.dist, threads).map_err(core_failure)?;

    let mut csv = Vec::new();
    let csv_path;
    joint
        .write_csv(&mut csv)
        .map_err(|e| io_failure(&args.source.out, e))?;
    let cells = joint.grid().n_points() * joint.times().len();
    if cells <= CSV_CELL_CUTOFF {
        csv_path = args.source.out.join("joint.csv");
        write_bytes(&csv_path, &csv)?;
    } else {
        csv_path = args.source.out.join("joint.csv.gz");
        write_gzip(&csv_path, &csv)?;
    }

    let bin_path = args.source.out.join("joint.bin");
    let mut bin = Vec::new();
    joint
        .write_binary(&mut bin)
        .map_err(|e| io_failure(&bin_path, e))?;
    write_bytes(&bin_path, &bin)?;

    let mut mx = String::from("x,density\n");
    for (x, g) in joint.grid().positions().iter().zip(joint.spatial_marginal()) {
        mx.push_str(&format!("{},{}\n", sig17(*x), sig17(*g)));
    }
    let mx_path = args.source.out.join("marginal_x.csv");
    write_text(&mx_path, &mx)?;

    let mut mt = String::from("t,marginal,f\n");
    for (t, m) in joint.times().iter().zip(joint.time_marginal()) {
        mt.push_str(&format!(
            "{},{},{}\n",
            sig17(*t),
            sig17(*m),
            sig17(run.dist.pdf_clamped(*t)),
        ));
    }
    let mt_path = args.source.out.join("marginal_t.csv");
    write_text(&mt_path, &mt)?;

    let bayes = joint.bayes_consistency();
    say!("scenario {}", run.scenario.name);
    say!("threads {threads}");
    say!("normalization {}", sig17(joint.normalization()));
    say!(
        "slice_marginal_residual {}",
        sig17(joint.slice_marginal_max_residual(&run.dist))
    );
    say!(
        "bayes_max_residual {} over {} entries ({} empty columns, {} empty rows)",
        sig17(bayes.max_residual),
        bayes.entries_checked,
        bayes.columns_skipped,
        bayes.rows_skipped,
    );
    for p in [&csv_path, &bin_path, &mx_path, &mt_path] {
        say!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs) -> Result<(), Failure> {
    let run = realize(&args.source)?;
    let traj = &*run.traj;
    ensure_out_dir(&args.source.out)?;

    let n = args.n as usize;
    let records =
        sampler::sample_measurements(traj, &run.dist, n, args.seed).map_err(core_failure)?;
    let path = args.source.out.join("records.csv");
    write_text(&path, &sampler::records_to_csv(&records))?;

    say!("scenario {}", run.scenario.name);
    say!("records {n}");
    say!("seed {}", args.seed);

    if run.dist.is_delta() {
        say!("ks skipped (sharp readout time is a point mass)");
    } else {
        let times: Vec<f64> = records.iter().map(|r| r.t).collect();
        let ks = stats::ks_statistic(&times, |t| run.dist.cdf(t));
        let critical = stats::ks_critical_1pct(n);
        say!("ks_statistic {}", sig17(ks));
        say!("ks_critical_1pct {}", sig17(critical));
        say!("ks_rejected {}", ks > critical);
    }

    let (t_edges, x_edges) = gof_edges(traj);
    let expected = expected_cell_masses(traj, &run.dist, &t_edges, &x_edges);
    let observed = observed_cell_counts(&records, &t_edges, &x_edges);
    let expected_counts: Vec<f64> = expected.iter().map(|m| m * n as f64).collect();
    let observed: Vec<f64> = observed.iter().map(|c| *c as f64).collect();
    match stats::chi_square_gof(&observed, &expected_counts, 0.01, 5.0) {
        Ok(test) => {
            say!("chi_square {}", sig17(test.statistic));
            say!("chi_square_dof {}", test.dof);
            say!("chi_square_critical {}", sig17(test.critical));
            say!("chi_square_rejected {}", test.rejected);
        }
        Err(err) => println!("chi_square skipped ({err})"),
    }

    let values: Vec<f64> = records.iter().map(|r| r.outcome.value()).collect();
    let (mean, se) = stats::mean_and_standard_error(&values).map_err(core_failure)?;
    say!("empirical_mean {}", sig17(mean));
    say!("empirical_se {}", sig17(se));
    say!(
        "analytic_mean {}",
        sig17(analytic_outcome_mean(traj, &run.dist))
    );
    say!("wrote {}", path.display());
    Ok(())
}

/// Histogram edges for the goodness-of-fit test. Time edges sit on half-node
/// boundaries so a bin holds an exact set of trajectory nodes; the outcome
/// axis uses the grid span for positions and unit-width bins per basis index.
fn gof_edges(traj: &Trajectory) -> (Vec<f64>, Vec<f64>) {
    let n_nodes = traj.time_grid().n_nodes();
    let dt = traj.time_grid().dt();
    let n_bins_t = GOF_BINS.min(n_nodes);
    let mut t_edges = Vec::with_capacity(n_bins_t + 1);
    for j in 0..=n_bins_t {
        // Node index boundary rounded to keep the bins near-equal.
        let idx = (j as f64 * n_nodes as f64 / n_bins_t as f64).round();
        t_edges.push((idx - 0.5) * dt);
    }
    let x_edges = match traj.repr() {
        Representation::Grid(grid) => {
            let lo = grid.x_min();
            let hi = grid.x_max();
            let n = GOF_BINS;
            (0..=n)
                .map(|i| lo + (hi - lo) * i as f64 / n as f64)
                .collect()
        }
        Representation::FiniteDim(dim) => (0..=*dim).map(|i| i as f64 - 0.5).collect(),
    };
    (t_edges, x_edges)
}

/// Bin index for a value given ascending edges; values outside the range
/// land in the nearest end bin, matching how the counts are accumulated.
fn bin_of(edges: &[f64], v: f64) -> usize {
    let n_bins = edges.len() - 1;
    let idx = edges.partition_point(|e| *e <= v);
    idx.saturating_sub(1).min(n_bins - 1)
}

/// Expected per-cell probability mass under the discrete law the sampler
/// draws from: each node owns the readout mass of its nearest-neighbor time
/// cell, and outcomes within the slice follow the Born weights.
fn expected_cell_masses(
    traj: &Trajectory,
    dist: &CollapseDistribution,
    t_edges: &[f64],
    x_edges: &[f64],
) -> Vec<f64> {
    let n_t = t_edges.len() - 1;
    let n_x = x_edges.len() - 1;
    let dt = traj.time_grid().dt();
    let weight = traj.repr().weight();
    let mut cells = vec![0.0; n_t * n_x];
    for (k, t) in traj.time_grid().nodes().iter().enumerate() {
        let mass = dist.cdf(t + 0.5 * dt) - dist.cdf(t - 0.5 * dt);
        if mass == 0.0 {
            continue;
        }
        let ti = bin_of(t_edges, *t);
        let density = traj.state(k).density();
        for (i, d) in density.iter().enumerate() {
            let v = outcome_value(traj, i);
            cells[ti * n_x + bin_of(x_edges, v)] += mass * d * weight;
        }
    }
    cells
}

fn observed_cell_counts(
    records: &[MeasurementRecord],
    t_edges: &[f64],
    x_edges: &[f64],
) -> Vec<u64> {
    let n_x = x_edges.len() - 1;
    let mut cells = vec![0u64; (t_edges.len() - 1) * n_x];
    for r in records {
        cells[bin_of(t_edges, r.t) * n_x + bin_of(x_edges, r.outcome.value())] += 1;
    }
    cells
}

fn outcome_value(traj: &Trajectory, i: usize) -> f64 {
    match traj.repr() {
        Representation::Grid(grid) => grid.position(i),
        Representation::FiniteDim(_) => i as f64,
    }
}

/// Mean outcome value under the same discrete law the sampler uses, the
/// honest comparison target for the empirical mean.
fn analytic_outcome_mean(traj: &Trajectory, dist: &CollapseDistribution) -> f64 {
    let dt = traj.time_grid().dt();
    let weight = traj.repr().weight();
    let mut mean = 0.0;
    for (k, t) in traj.time_grid().nodes().iter().enumerate() {
        let mass = dist.cdf(t + 0.5 * dt) - dist.cdf(t - 0.5 * dt);
        if mass == 0.0 {
            continue;
        }
        let slice: f64 = traj
            .state(k)
            .density()
            .iter()
            .enumerate()
            .map(|(i, d)| outcome_value(traj, i) * d * weight)
            .sum();
        mean += mass * slice;
    }
    mean
}

/// One line of the verification report.
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
}

impl Check {
    /// Pass when |value| <= tolerance.
    fn residual(name: &'static str, value: f64, tolerance: f64) -> Check {
        Check {
            name,
            value,
            tolerance,
            passed: value.abs() <= tolerance,
        }
    }

    /// Pass when value >= -tolerance (eigenvalue floors).
    fn floor(name: &'static str, value: f64, tolerance: f64) -> Check {
        Check {
            name,
            value,
            tolerance,
            passed: value >= -tolerance,
        }
    }

    /// Pass when |value - center| <= tolerance.
    fn window(name: &'static str, value: f64, center: f64, tolerance: f64) -> Check {
        Check {
            name,
            value,
            tolerance,
            passed: (value - center).abs() <= tolerance,
        }
    }
}

const CHECK_NAMES: [&str; 11] = [
    "trajectory_norm_drift",
    "omega_trace",
    "omega_hermiticity",
    "omega_min_eigenvalue",
    "trace_identity",
    "delta_recovery",
    "commutator_order",
    "commutator_constant",
    "joint_normalization",
    "slice_marginal",
    "bayes_residual",
];

/// Parse repeated KEY=VAL tolerance overrides; keys must be check names.
fn parse_tolerances(raw: &[String]) -> Result<HashMap<String, f64>, Failure> {
    let mut map = HashMap::new();
    for item in raw {
        let Some((key, val)) = item.split_once('=') else {
            return Err(usage(format!("--tolerance expects KEY=VAL, got `{item}`")));
        };
        if !CHECK_NAMES.contains(&key) {
            return Err(usage(format!(
                "unknown tolerance key `{key}`; valid: {}",
                CHECK_NAMES.join(", ")
            )));
        }
        let parsed: f64 = val
            .parse()
            .map_err(|_| usage(format!("tolerance `{key}` needs a number, got `{val}`")))?;
        if !parsed.is_finite() || parsed <= 0.0 {
            return Err(usage(format!(
                "tolerance `{key}` must be a positive finite number"
            )));
        }
        map.insert(key.to_string(), parsed);
    }
    Ok(map)
}

fn cmd_check(args: &CheckArgs) -> Result<(), Failure> {
    let overrides = parse_tolerances(&args.tolerance)?;
    let tol = |name: &str, default: f64| overrides.get(name).copied().unwrap_or(default);
    let run = realize(&args.source)?;
    let traj = &*run.traj;
    let mut checks = Vec::new();

    checks.push(Check::residual(
        "trajectory_norm_drift",
        traj.norm_drift(),
        tol("trajectory_norm_drift", tolerances::NORM_DRIFT),
    ));

    let obs_name = scenario::default_observable(traj.repr());
    let op = scenario::build_observable(&obs_name, traj).map_err(core_failure)?;
    let omega = build_smeared_state(&run)?;
    let report =
        smear::omega_trace_checks(&omega, traj, &run.dist, Some(&op)).map_err(core_failure)?;
    if let Some(trace) = report.trace {
        let imag = report.trace_imag.unwrap_or(0.0);
        checks.push(Check::residual(
            "omega_trace",
            (trace - 1.0).abs().max(imag.abs()),
            tol("omega_trace", tolerances::OMEGA_TRACE),
        ));
    }
    if let Some(defect) = report.hermiticity_defect {
        checks.push(Check::residual(
            "omega_hermiticity",
            defect,
            tol("omega_hermiticity", tolerances::OMEGA_HERMITICITY),
        ));
    }
    if let Some(min_eig) = report.min_eigenvalue {
        checks.push(Check::floor(
            "omega_min_eigenvalue",
            min_eig,
            tol("omega_min_eigenvalue", tolerances::OMEGA_EIGENVALUE_FLOOR.abs()),
        ));
    }
    if let Some(residual) = report.identity_residual {
        checks.push(Check::residual(
            "trace_identity",
            residual,
            tol("trace_identity", tolerances::TRACE_IDENTITY),
        ));
    }

    // Sharp readout at an exact node must reproduce that slice's value.
    let series = traj.expectation_series(&op).map_err(core_failure)?;
    let k = ((0.37 * traj.time_grid().n_steps() as f64).round() as usize)
        .min(traj.time_grid().n_steps());
    let sharp = CollapseDistribution::delta(traj.time_grid().node(k)).map_err(core_failure)?;
    let recovered = smear::smeared_expectation(traj, &sharp, &op).map_err(core_failure)?;
    checks.push(Check::residual(
        "delta_recovery",
        (recovered.value - series[k]).abs(),
        tol("delta_recovery", tolerances::DELTA_RECOVERY),
    ));

    let (ratio, constant) = commutator_probe(run.hbar).map_err(core_failure)?;
    checks.push(Check::window(
        "commutator_order",
        ratio,
        4.0,
        tol("commutator_order", COMMUTATOR_RATIO_TOL),
    ));
    checks.push(Check::residual(
        "commutator_constant",
        (constant.norm() - run.hbar).abs(),
        tol("commutator_constant", COMMUTATOR_CONSTANT_TOL),
    ));

    let positional = matches!(traj.repr(), Representation::Grid(_));
    if positional && !run.dist.is_delta() {
        let threads = worker_threads()?;
        let joint =
            spacetime::joint_density_parallel(traj, &run.dist, threads).map_err(core_failure)?;
        checks.push(Check::residual(
            "joint_normalization",
            (joint.normalization() - 1.0).abs(),
            tol("joint_normalization", tolerances::JOINT_NORMALIZATION),
        ));
        checks.push(Check::residual(
            "slice_marginal",
            joint.slice_marginal_max_residual(&run.dist),
            tol("slice_marginal", tolerances::SLICE_MARGINAL),
        ));
        checks.push(Check::residual(
            "bayes_residual",
            joint.bayes_consistency().max_residual,
            tol("bayes_residual", tolerances::BAYES_RESIDUAL),
        ));
    }

    let mut failed = 0usize;
    for check in &checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        say!(
            "CHECK {} {verdict} {} {}",
            check.name,
            sig17(check.value),
            sig17(check.tolerance),
        );
        if !check.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure {
            code: EXIT_CHECK,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    Ok(())
}

/// Second-order convergence probe for the time-label/generator commutator:
/// a smooth single-column test function evaluated at two grid resolutions.
/// Returns the residual ratio (ideal 4) and the measured constant from the
/// finest grid.
fn commutator_probe(hbar: f64) -> chronos_core::Result<(f64, Complex64)> {
    let residual_at = |n: usize| -> chronos_core::Result<f64> {
        exp_rows(n, hbar)?.commutator_residual()
    };
    let r_coarse = residual_at(65)?;
    let r_fine = residual_at(129)?;
    let constant = exp_rows(1025, hbar)?.commutator_constant()?;
    Ok((r_coarse / r_fine, constant))
}

/// exp(-t) rows on [0, 1]: smooth, nonvanishing, cheap to refine.
fn exp_rows(n: usize, hbar: f64) -> chronos_core::Result<SpacetimeFunction> {
    let times: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let rows: Vec<Vec<Complex64>> = times
        .iter()
        .map(|t| vec![Complex64::new((-t).exp(), 0.0)])
        .collect();
    SpacetimeFunction::new(times, rows, 1.0, hbar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides_parse_and_reject() {
        let ok = parse_tolerances(&["omega_trace=1e-6".into(), "delta_recovery=0.5".into()])
            .expect("valid overrides");
        assert_eq!(ok["omega_trace"], 1e-6);
        assert_eq!(ok["delta_recovery"], 0.5);
        assert!(parse_tolerances(&["omega_trace".into()]).is_err());
        assert!(parse_tolerances(&["no_such_check=1".into()]).is_err());
        assert!(parse_tolerances(&["omega_trace=-1".into()]).is_err());
        assert!(parse_tolerances(&["omega_trace=abc".into()]).is_err());
    }

    #[test]
    fn bins_clamp_out_of_range_values() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bin_of(&edges, -5.0), 0);
        assert_eq!(bin_of(&edges, 0.5), 0);
        assert_eq!(bin_of(&edges, 1.0), 1);
        assert_eq!(bin_of(&edges, 2.999), 2);
        assert_eq!(bin_of(&edges, 7.0), 2);
    }

    #[test]
    fn expected_cell_masses_sum_to_one() {
        let rz = scenario::builtin("rabi-qubit+exponential")
            .unwrap()
            .realize()
            .unwrap();
        let (t_edges, x_edges) = gof_edges(&rz.trajectory);
        let cells = expected_cell_masses(&rz.trajectory, &rz.collapse, &t_edges, &x_edges);
        let total: f64 = cells.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "total mass {total}");
    }

    #[test]
    fn analytic_mean_tracks_the_smeared_expectation() {
        // The discrete-law mean of the index outcome on a qubit is the
        // smeared excited-state population.
        let rz = scenario::builtin("rabi-qubit+exponential")
            .unwrap()
            .realize()
            .unwrap();
        let op = scenario::build_observable("projector:1", &rz.trajectory).unwrap();
        let smeared = smear::smeared_expectation(&rz.trajectory, &rz.collapse, &op)
            .unwrap()
            .value;
        let mean = analytic_outcome_mean(&rz.trajectory, &rz.collapse);
        assert!(
            (mean - smeared).abs() < 1e-3,
            "mean {mean} vs smeared {smeared}"
        );
    }

    #[test]
    fn commutator_probe_shows_second_order() {
        let (ratio, constant) = commutator_probe(1.0).unwrap();
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        assert!((constant.norm() - 1.0).abs() < 1e-4);
    }
}
