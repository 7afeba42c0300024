//! End-to-end tests against the built binary: exit codes, artifact bytes,
//! and the stable stdout contract scripts are allowed to parse.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_chronos")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
        .lines()
        .next()
        .expect("nonempty file")
        .to_string()
}

/// Free wave packet on a small grid; collapse variant is the caller's.
fn packet_json(collapse: &str) -> String {
    format!(
        r#"{{
  "name": "cli-packet",
  "system": {{
    "type": "grid",
    "x_min": -8.0, "x_max": 8.0, "n_points": 64,
    "potential": {{ "kind": "zero" }},
    "initial": {{ "kind": "gaussian", "x0": -1.0, "p0": 1.5, "sigma": 1.0 }}
  }},
  "time_grid": {{ "t_max": 1.0, "n_steps": 60 }},
  "collapse": {collapse},
  "constants": {{ "hbar": 1.0 }}
}}"#
    )
}

const UNIFORM: &str = r#"{ "variant": "uniform", "a": 0.0, "b": 1.0 }"#;

/// Two-level system precessing under sigma_x, written out as a dense matrix.
fn qubit_json() -> String {
    r#"{
  "name": "cli-qubit",
  "system": {
    "type": "finite",
    "hamiltonian": [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]],
    "initial": { "kind": "basis", "index": 0 }
  },
  "time_grid": { "t_max": 2.0, "n_steps": 200 },
  "collapse": { "variant": "uniform", "a": 0.0, "b": 2.0 },
  "constants": { "hbar": 1.0 }
}"#
    .to_string()
}

fn write_scenario(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).expect("write scenario");
    path
}

fn out_dir(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    let help_text = text(&help.stdout);
    for sub in ["evolve", "smear", "joint", "sample", "check"] {
        assert!(help_text.contains(sub), "help mentions {sub}");
    }
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["evolve", "--help"])), 0);
}

#[test]
fn evolve_builtin_writes_summary_and_density() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "out");
    let res = run(&["evolve", "--scenario", "rabi-qubit+delta", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "stderr: {}", text(&res.stderr));
    let stdout = text(&res.stdout);
    assert!(stdout.contains("norm_drift "));
    assert!(stdout.contains("schrodinger_residual "));
    assert_eq!(first_line(&out.join("summary.csv")), "t,norm,energy,expectation");
    assert_eq!(first_line(&out.join("density.csv")), "t,index,probability");
}

#[test]
fn evolve_grid_file_honors_tmax_override() {
    let dir = TempDir::new().unwrap();
    let file = write_scenario(&dir, "packet.json", &packet_json(UNIFORM));
    let out = out_dir(&dir, "out");
    let res = run(&[
        "evolve",
        "--file",
        file.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--tmax-override",
        "2.0",
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", text(&res.stderr));
    assert_eq!(first_line(&out.join("density.csv")), "t,x,density");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let last_t: f64 = summary
        .lines()
        .last()
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((last_t - 2.0).abs() < 1e-12, "window extends to the override");
}

#[test]
fn source_flags_are_required_and_exclusive() {
    let dir = TempDir::new().unwrap();
    let file = write_scenario(&dir, "packet.json", &packet_json(UNIFORM));
    let neither = run(&["evolve"]);
    assert_eq!(code(&neither), 1);
    let both = run(&[
        "evolve",
        "--scenario",
        "rabi-qubit+delta",
        "--file",
        file.to_str().unwrap(),
    ]);
    assert_eq!(code(&both), 1);
}

#[test]
fn unknown_builtin_lists_the_menu() {
    let res = run(&["evolve", "--scenario", "no-such-system+delta"]);
    assert_eq!(code(&res), 2);
    let err = text(&res.stderr);
    assert!(err.contains("unknown scenario"));
    assert!(err.contains("rabi-qubit+delta"), "menu lists valid names");
}

#[test]
fn invalid_scenario_files_name_the_field() {
    let dir = TempDir::new().unwrap();
    let bad_constants = packet_json(UNIFORM).replace(r#""hbar": 1.0"#, r#""hbar": -1.0"#);
    let file = write_scenario(&dir, "bad.json", &bad_constants);
    let res = run(&["evolve", "--file", file.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(text(&res.stderr).contains("constants.hbar"));

    let garbled = write_scenario(&dir, "garbled.json", "{ not json");
    let res = run(&["evolve", "--file", garbled.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(text(&res.stderr).contains("schema"));
}

#[test]
fn unknown_observable_and_representation_mismatch_codes() {
    let dir = TempDir::new().unwrap();
    let qubit = write_scenario(&dir, "qubit.json", &qubit_json());
    let out = out_dir(&dir, "out");
    let res = run(&[
        "smear",
        "--file",
        qubit.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--observable",
        "bogus",
    ]);
    assert_eq!(code(&res), 3);
    assert!(text(&res.stderr).contains("unknown observable"));

    // The two-dimensional table needs a spatial grid; a basis register has none.
    let res = run(&["joint", "--file", qubit.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 4);
}

#[test]
fn joint_on_sharp_time_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let delta = packet_json(r#"{ "variant": "delta", "t_prime": 0.5 }"#);
    let file = write_scenario(&dir, "sharp.json", &delta);
    let res = run(&["joint", "--file", file.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(text(&res.stderr).contains("evolve"), "points at the right command");
}

#[test]
fn joint_artifacts_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let file = write_scenario(&dir, "packet.json", &packet_json(UNIFORM));
    let mut bytes = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = out_dir(&dir, &format!("out{i}"));
        let res = run_env(
            &["joint", "--file", file.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[("CHRONOS_THREADS", threads)],
        );
        assert_eq!(code(&res), 0, "stderr: {}", text(&res.stderr));
        assert!(text(&res.stdout).contains(&format!("threads {threads}")));
        assert_eq!(first_line(&out.join("joint.csv")), "x,t,p");
        assert_eq!(first_line(&out.join("marginal_x.csv")), "x,density");
        assert_eq!(first_line(&out.join("marginal_t.csv")), "t,marginal,f");
        bytes.push((
            fs::read(out.join("joint.csv")).unwrap(),
            fs::read(out.join("joint.bin")).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1], "artifacts are byte-identical across thread counts");
}

#[test]
fn oversized_joint_tables_gzip_deterministically() {
    let dir = TempDir::new().unwrap();
    // 256 * 20001 cells crosses the plain-CSV cutoff, so the table gzips.
    let big = packet_json(UNIFORM)
        .replace(r#""n_points": 64"#, r#""n_points": 256"#)
        .replace(r#""n_steps": 60"#, r#""n_steps": 20000"#);
    let file = write_scenario(&dir, "big.json", &big);
    let mut archives = Vec::new();
    for name in ["a", "b"] {
        let out = out_dir(&dir, name);
        let res = run(&["joint", "--file", file.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "stderr: {}", text(&res.stderr));
        assert!(!out.join("joint.csv").exists(), "plain CSV is skipped past the cutoff");
        archives.push(fs::read(out.join("joint.csv.gz")).unwrap());
    }
    assert_eq!(archives[0][..2], [0x1f, 0x8b], "gzip magic");
    assert_eq!(archives[0][4..8], [0, 0, 0, 0], "zeroed mtime keeps bytes stable");
    assert_eq!(archives[0], archives[1], "reruns reproduce the archive exactly");
}

#[test]
fn sampling_replays_per_seed() {
    let dir = TempDir::new().unwrap();
    let file = write_scenario(&dir, "packet.json", &packet_json(UNIFORM));
    let mut runs = Vec::new();
    for (name, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let out = out_dir(&dir, name);
        let res = run(&[
            "sample",
            "--file",
            file.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--n",
            "500",
            "--seed",
            seed,
        ]);
        assert_eq!(code(&res), 0, "stderr: {}", text(&res.stderr));
        assert!(text(&res.stdout).contains("empirical_mean "));
        assert_eq!(first_line(&out.join("records.csv")), "record_id,t,outcome");
        runs.push(fs::read(out.join("records.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1], "same seed replays the records");
    assert_ne!(runs[0], runs[2], "a different seed draws differently");
}

#[test]
fn smear_reports_both_averaging_paths() {
    let dir = TempDir::new().unwrap();
    let qubit = write_scenario(&dir, "qubit.json", &qubit_json());
    let out = out_dir(&dir, "out");
    let res = run(&["smear", "--file", qubit.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "stderr: {}", text(&res.stderr));
    let stdout = text(&res.stdout);
    let value = |key: &str| -> f64 {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("stdout line {key}"))
            .trim()
            .parse()
            .expect("numeric field")
    };
    let direct = value("smeared_expectation ");
    let via_trace = value("trace_product ");
    assert!((direct - via_trace).abs() < 1e-10, "quadrature and trace paths agree");
    assert_eq!(first_line(&out.join("smear.csv")), "t,f,expectation,integrand");
}

#[test]
fn check_lines_parse_and_overrides_can_force_failure() {
    let known = [
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
    let ok = run(&["check", "--scenario", "rabi-qubit+uniform"]);
    assert_eq!(code(&ok), 0, "stderr: {}", text(&ok.stderr));
    let stdout = text(&ok.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("CHECK ")).collect();
    assert!(lines.len() >= 8, "a basis register still runs the core checks");
    for line in &lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(parts.len(), 5, "CHECK name verdict value tolerance: {line}");
        assert!(known.contains(&parts[1]), "known check name in {line}");
        assert_eq!(parts[2], "PASS");
        parts[3].parse::<f64>().expect("value parses");
        parts[4].parse::<f64>().expect("tolerance parses");
    }

    let forced = run(&[
        "check",
        "--scenario",
        "rabi-qubit+uniform",
        "--tolerance",
        "commutator_constant=1e-300",
    ]);
    assert_eq!(code(&forced), 5);
    assert!(text(&forced.stdout).contains("CHECK commutator_constant FAIL"));
    assert!(text(&forced.stderr).contains("checks failed"));

    let bad_key = run(&["check", "--scenario", "rabi-qubit+uniform", "--tolerance", "nope=1"]);
    assert_eq!(code(&bad_key), 1);
}
