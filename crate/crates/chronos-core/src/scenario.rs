//! Curated physical setups binding dynamics, readout-time laws, and
//! reference values, plus a JSON file format for user-defined ones.
//!
//! A scenario is pure data: which system, which initial state, which
//! readout-time density, which constants. `realize` turns it into a
//! propagated trajectory and a constructed distribution. The builtin list
//! pairs six systems with four readout-time laws each; names follow
//! `<system>+<law>`, and each bare system name aliases one canonical pairing.

use crate::collapse::CollapseDistribution;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::operator::{
    basis_projector, build_hamiltonian, momentum_operator, pauli_z, position_operator,
    LinearOperator,
};
use crate::propagate::{evolve_exact, evolve_split_operator, TimeGrid, Trajectory};
use crate::quad::trapezoid_mass;
use crate::state::{Representation, StateVector};
use crate::tolerances;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A complete, serializable description of one simulation setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSpec,
    pub time_grid: TimeGridSpec,
    pub collapse: CollapseSpec,
    pub constants: Constants,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<Reference>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    pub t_max: f64,
    pub n_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub hbar: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
}

fn default_mass() -> f64 {
    1.0
}

/// An expected value known independently of this library, with a note on
/// how it is known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub observable: String,
    pub value: f64,
    pub oracle: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    Grid {
        x_min: f64,
        x_max: f64,
        n_points: usize,
        potential: PotentialSpec,
        initial: GridInitialSpec,
    },
    Finite {
        /// Row-major matrix, each entry [re, im].
        hamiltonian: Vec<Vec<[f64; 2]>>,
        initial: FiniteInitialSpec,
    },
}

/// The fixed potential menu.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Harmonic {
        omega: f64,
        #[serde(default)]
        center: f64,
    },
    /// A smooth-walled well: height outside, zero inside, tanh walls.
    SquareWell {
        half_width: f64,
        height: f64,
        wall_softness: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridInitialSpec {
    Gaussian { x0: f64, p0: f64, sigma: f64 },
    GroundState,
    EigenSuperposition { levels: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FiniteInitialSpec {
    Vector { amplitudes: Vec<[f64; 2]> },
    Basis { index: usize },
    GroundState,
    EigenSuperposition { levels: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CollapseSpec {
    Delta {
        t_prime: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Exponential {
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    TruncatedGaussian {
        mu: f64,
        sigma: f64,
    },
    Tabulated {
        #[serde(default)]
        times: Vec<f64>,
        #[serde(default)]
        densities: Vec<f64>,
        /// Resolved and inlined when loading from a file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv_path: Option<String>,
    },
}

/// A scenario turned into concrete objects: the propagated trajectory and
/// the constructed readout-time distribution.
pub struct Realization {
    pub trajectory: Trajectory,
    pub collapse: CollapseDistribution,
    pub hbar: f64,
    pub mass: f64,
}

impl Scenario {
    /// Check every invariant that does not require propagation: constants,
    /// time grid, system construction, initial-state norm, and the
    /// readout-time density including its coverage of the time window.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::scenario("name", "must not be empty"));
        }
        self.check_constants()?;
        let tg = self.make_time_grid(None)?;
        self.build_system()?;
        self.build_collapse(tg.t_max())?;
        Ok(())
    }

    fn check_constants(&self) -> Result<()> {
        let c = &self.constants;
        if !(c.hbar.is_finite() && c.hbar > 0.0) {
            return Err(Error::scenario(
                "constants.hbar",
                format!("must be positive and finite, got {}", c.hbar),
            ));
        }
        if !(c.mass.is_finite() && c.mass > 0.0) {
            return Err(Error::scenario(
                "constants.mass",
                format!("must be positive and finite, got {}", c.mass),
            ));
        }
        Ok(())
    }

    fn make_time_grid(&self, t_max_override: Option<f64>) -> Result<TimeGrid> {
        let t_max = t_max_override.unwrap_or(self.time_grid.t_max);
        TimeGrid::new(t_max, self.time_grid.n_steps)
            .map_err(|e| Error::scenario("time_grid", e.to_string()))
    }

    /// Build the Hamiltonian and the normalized initial state.
    pub fn build_system(&self) -> Result<(LinearOperator, StateVector)> {
        let hbar = self.constants.hbar;
        match &self.system {
            SystemSpec::Grid {
                x_min,
                x_max,
                n_points,
                potential,
                initial,
            } => {
                let grid = SpatialGrid::new(*x_min, *x_max, *n_points)
                    .map_err(|e| Error::scenario("system", e.to_string()))?;
                let vfn = potential_fn(potential, self.constants.mass)?;
                let h = build_hamiltonian(&grid, vfn.as_ref(), self.constants.mass, hbar)
                    .map_err(|e| Error::scenario("system.potential", e.to_string()))?;
                let repr = Representation::Grid(grid);
                let psi0 = match initial {
                    GridInitialSpec::Gaussian { x0, p0, sigma } => {
                        StateVector::gaussian(grid, *x0, *p0, *sigma, hbar)
                            .map_err(|e| Error::scenario("system.initial", e.to_string()))?
                    }
                    GridInitialSpec::GroundState => eigen_initial(&h, &repr, &[0])?,
                    GridInitialSpec::EigenSuperposition { levels } => {
                        eigen_initial(&h, &repr, levels)?
                    }
                };
                Ok((h, psi0))
            }
            SystemSpec::Finite {
                hamiltonian,
                initial,
            } => {
                let dim = hamiltonian.len();
                if dim == 0 || hamiltonian.iter().any(|row| row.len() != dim) {
                    return Err(Error::scenario(
                        "system.hamiltonian",
                        "must be a nonempty square matrix",
                    ));
                }
                let mut m = DMatrix::<Complex64>::zeros(dim, dim);
                for (i, row) in hamiltonian.iter().enumerate() {
                    for (j, [re, im]) in row.iter().enumerate() {
                        if !(re.is_finite() && im.is_finite()) {
                            return Err(Error::scenario(
                                "system.hamiltonian",
                                format!("entry ({i}, {j}) is not finite"),
                            ));
                        }
                        m[(i, j)] = Complex64::new(*re, *im);
                    }
                }
                let h = LinearOperator::dense_hermitian(m)
                    .map_err(|e| Error::scenario("system.hamiltonian", e.to_string()))?;
                let repr = Representation::FiniteDim(dim);
                let psi0 = match initial {
                    FiniteInitialSpec::Vector { amplitudes } => {
                        if amplitudes.len() != dim {
                            return Err(Error::scenario(
                                "system.initial.amplitudes",
                                format!("expected {dim} entries, got {}", amplitudes.len()),
                            ));
                        }
                        let amps = amplitudes
                            .iter()
                            .map(|[re, im]| Complex64::new(*re, *im))
                            .collect();
                        let psi = StateVector::new(repr.clone(), amps)
                            .map_err(|e| Error::scenario("system.initial.amplitudes", e.to_string()))?;
                        let norm = psi.norm();
                        if (norm - 1.0).abs() > tolerances::INITIAL_NORM_SLACK {
                            return Err(Error::scenario(
                                "system.initial.amplitudes",
                                format!("norm is {norm}, expected 1"),
                            ));
                        }
                        psi.normalize()
                            .map_err(|e| Error::scenario("system.initial.amplitudes", e.to_string()))?
                    }
                    FiniteInitialSpec::Basis { index } => {
                        if *index >= dim {
                            return Err(Error::scenario(
                                "system.initial.index",
                                format!("index {index} out of range for dimension {dim}"),
                            ));
                        }
                        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
                        amps[*index] = Complex64::new(1.0, 0.0);
                        StateVector::new(repr.clone(), amps)?
                    }
                    FiniteInitialSpec::GroundState => eigen_initial(&h, &repr, &[0])?,
                    FiniteInitialSpec::EigenSuperposition { levels } => {
                        eigen_initial(&h, &repr, levels)?
                    }
                };
                Ok((h, psi0))
            }
        }
    }

    /// Construct the readout-time distribution, truncated at the simulated
    /// window, and refuse densities the window cannot cover.
    pub fn build_collapse(&self, t_max: f64) -> Result<CollapseDistribution> {
        let dist = match &self.collapse {
            CollapseSpec::Delta { t_prime } => {
                if *t_prime > t_max * (1.0 + 1e-12) {
                    return Err(Error::scenario(
                        "collapse.t_prime",
                        format!("readout time {t_prime} is past the window end {t_max}"),
                    ));
                }
                CollapseDistribution::delta(*t_prime)
            }
            CollapseSpec::Uniform { a, b } => CollapseDistribution::uniform(*a, *b, t_max),
            CollapseSpec::Exponential { rate, offset } => {
                CollapseDistribution::exponential(*rate, *offset, t_max)
            }
            CollapseSpec::Gamma {
                shape,
                scale,
                offset,
            } => CollapseDistribution::gamma(*shape, *scale, *offset, t_max),
            CollapseSpec::TruncatedGaussian { mu, sigma } => {
                CollapseDistribution::truncated_gaussian(*mu, *sigma, t_max)
            }
            CollapseSpec::Tabulated {
                times,
                densities,
                csv_path,
            } => {
                if csv_path.is_some() {
                    return Err(Error::scenario(
                        "collapse.csv_path",
                        "table files are resolved only when loading a scenario file",
                    ));
                }
                if times.len() != densities.len() || times.len() < 2 {
                    return Err(Error::scenario(
                        "collapse.times",
                        "times and densities must have equal length of at least 2",
                    ));
                }
                let raw_mass = trapezoid_mass(times, densities);
                if (raw_mass - 1.0).abs() > tolerances::TABULATED_MASS_SLACK {
                    return Err(Error::scenario(
                        "collapse.densities",
                        format!(
                            "densities integrate to {raw_mass:.6}, expected 1 within {}",
                            tolerances::TABULATED_MASS_SLACK
                        ),
                    ));
                }
                if let Some(last) = times.last() {
                    if *last > t_max * (1.0 + 1e-12) {
                        return Err(Error::scenario(
                            "collapse.times",
                            format!("table extends to {last}, past the window end {t_max}"),
                        ));
                    }
                }
                CollapseDistribution::tabulated(times.clone(), densities.clone())
            }
        };
        dist.map_err(|e| Error::scenario("collapse", e.to_string()))
    }

    /// Propagate and construct everything this scenario describes.
    pub fn realize(&self) -> Result<Realization> {
        self.realize_with(None)
    }

    /// Like `realize`, but with the window end replaced. The step count is
    /// kept, so overriding changes the step size.
    pub fn realize_with(&self, t_max_override: Option<f64>) -> Result<Realization> {
        self.check_constants()?;
        let tg = self.make_time_grid(t_max_override)?;
        let (h, psi0) = self.build_system()?;
        let collapse = self.build_collapse(tg.t_max())?;
        let hbar = self.constants.hbar;
        let trajectory = match psi0.repr() {
            Representation::Grid(_) => evolve_split_operator(&psi0, &h, &tg, hbar)?,
            Representation::FiniteDim(_) => evolve_exact(&psi0, &h, &tg, hbar)?,
        };
        Ok(Realization {
            trajectory,
            collapse,
            hbar,
            mass: self.constants.mass,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::scenario("schema", e.to_string()))
    }

    /// Parse and validate. Table files are not resolvable here; use
    /// `load_scenario` for scenarios that point at a CSV.
    pub fn from_json(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::scenario("schema", e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn potential_fn(spec: &PotentialSpec, mass: f64) -> Result<Box<dyn Fn(f64) -> f64>> {
    match spec {
        PotentialSpec::Zero => Ok(Box::new(|_| 0.0)),
        PotentialSpec::Harmonic { omega, center } => {
            if !(omega.is_finite() && *omega > 0.0) {
                return Err(Error::scenario(
                    "system.potential.omega",
                    format!("must be positive and finite, got {omega}"),
                ));
            }
            let (m, w, c) = (mass, *omega, *center);
            Ok(Box::new(move |x| 0.5 * m * w * w * (x - c) * (x - c)))
        }
        PotentialSpec::SquareWell {
            half_width,
            height,
            wall_softness,
        } => {
            if !(half_width.is_finite() && *half_width > 0.0)
                || !(wall_softness.is_finite() && *wall_softness > 0.0)
                || !height.is_finite()
            {
                return Err(Error::scenario(
                    "system.potential",
                    "half_width and wall_softness must be positive, height finite",
                ));
            }
            let (a, h0, w) = (*half_width, *height, *wall_softness);
            Ok(Box::new(move |x| {
                h0 * (1.0 - 0.5 * (((x + a) / w).tanh() - ((x - a) / w).tanh()))
            }))
        }
    }
}

/// Equal-weight superposition of the requested eigenlevels (ascending by
/// eigenvalue). Each eigenvector's phase is fixed by making its largest
/// component real and positive, so construction is deterministic.
fn eigen_initial(
    h: &LinearOperator,
    repr: &Representation,
    levels: &[usize],
) -> Result<StateVector> {
    let dim = repr.dim();
    if levels.is_empty() {
        return Err(Error::scenario(
            "system.initial.levels",
            "need at least one level",
        ));
    }
    let mut seen = vec![false; dim];
    for level in levels {
        if *level >= dim {
            return Err(Error::scenario(
                "system.initial.levels",
                format!("level {level} out of range for dimension {dim}"),
            ));
        }
        if seen[*level] {
            return Err(Error::scenario(
                "system.initial.levels",
                format!("level {level} listed twice"),
            ));
        }
        seen[*level] = true;
    }
    let dense = h.to_dense(repr)?;
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for level in levels {
        let col = eig.eigenvectors.column(order[*level]);
        let mut anchor = 0;
        for i in 0..dim {
            if col[i].norm_sqr() > col[anchor].norm_sqr() {
                anchor = i;
            }
        }
        let phase = col[anchor] / col[anchor].norm();
        for i in 0..dim {
            amps[i] += col[i] * phase.conj();
        }
    }
    StateVector::new(repr.clone(), amps)?
        .normalize()
        .map_err(|e| Error::scenario("system.initial.levels", e.to_string()))
}

/// Read, parse, resolve any table file relative to the scenario's own
/// directory, and validate.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| Error::scenario("schema", e.to_string()))?;
    if let CollapseSpec::Tabulated {
        csv_path: csv @ Some(_),
        times,
        densities,
    } = &mut scenario.collapse
    {
        let rel = csv.take().expect("matched Some");
        let full = path.parent().unwrap_or(Path::new(".")).join(rel);
        let table = std::fs::read_to_string(&full)?;
        let (t, f) = crate::collapse::parse_density_csv(&table)
            .map_err(|e| Error::scenario("collapse.csv_path", e.to_string()))?;
        *times = t;
        *densities = f;
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Build a named observable for a trajectory's representation.
/// Valid names: x, p, H, sigma_z, projector:i.
pub fn build_observable(name: &str, traj: &Trajectory) -> Result<LinearOperator> {
    match traj.repr() {
        Representation::Grid(grid) => match name {
            "x" => Ok(position_operator(grid)),
            "p" => Ok(momentum_operator(grid, traj.hbar())),
            "H" => Ok(traj.hamiltonian().clone()),
            _ => Err(Error::UnknownObservable {
                name: name.into(),
                valid: "x, p, H (positional system)".into(),
            }),
        },
        Representation::FiniteDim(dim) => {
            if name == "H" {
                return Ok(traj.hamiltonian().clone());
            }
            if name == "sigma_z" && *dim == 2 {
                return Ok(pauli_z());
            }
            if let Some(rest) = name.strip_prefix("projector:") {
                if let Ok(index) = rest.parse::<usize>() {
                    if index < *dim {
                        return basis_projector(*dim, index);
                    }
                }
            }
            let mut valid = String::new();
            if *dim == 2 {
                valid.push_str("sigma_z, ");
            }
            valid.push_str(&format!("projector:0 through projector:{}, H", dim - 1));
            Err(Error::UnknownObservable {
                name: name.into(),
                valid,
            })
        }
    }
}

/// The observable a command falls back to when none is named.
pub fn default_observable(repr: &Representation) -> String {
    match repr {
        Representation::Grid(_) => "x".into(),
        Representation::FiniteDim(2) => "sigma_z".into(),
        Representation::FiniteDim(_) => "projector:0".into(),
    }
}

/// The observables a verification pass exercises for a representation.
pub fn suite_observables(repr: &Representation) -> Vec<String> {
    match repr {
        Representation::Grid(_) => vec!["x".into(), "p".into(), "H".into()],
        Representation::FiniteDim(2) => vec![
            "sigma_z".into(),
            "projector:0".into(),
            "projector:1".into(),
            "H".into(),
        ],
        Representation::FiniteDim(_) => {
            vec!["projector:0".into(), "projector:1".into(), "H".into()]
        }
    }
}

const LAW_TAGS: [&str; 4] = ["delta", "uniform", "exponential", "tgauss"];

fn law_spec(tag: &str, rabi: bool) -> CollapseSpec {
    match tag {
        "delta" => CollapseSpec::Delta { t_prime: 1.0 },
        "uniform" => {
            if rabi {
                CollapseSpec::Uniform {
                    a: 0.0,
                    b: std::f64::consts::TAU,
                }
            } else {
                CollapseSpec::Uniform { a: 0.0, b: 2.0 }
            }
        }
        "exponential" => CollapseSpec::Exponential {
            rate: 1.0,
            offset: 0.0,
        },
        "tgauss" => CollapseSpec::TruncatedGaussian {
            mu: 1.0,
            sigma: 0.2,
        },
        _ => unreachable!("law tags are fixed"),
    }
}

struct SystemEntry {
    name: &'static str,
    system: SystemSpec,
    /// (t_max, n_steps) per law tag, in LAW_TAGS order.
    grids: [(f64, usize); 4],
    references: fn(&str) -> Vec<Reference>,
}

fn builtin_systems() -> Vec<SystemEntry> {
    let tau = std::f64::consts::TAU;
    vec![
        SystemEntry {
            name: "free-gaussian",
            system: SystemSpec::Grid {
                x_min: -32.0,
                x_max: 96.0,
                n_points: 512,
                potential: PotentialSpec::Zero,
                initial: GridInitialSpec::Gaussian {
                    x0: 0.0,
                    p0: 2.0,
                    sigma: 1.0,
                },
            },
            grids: [(2.0, 800), (2.0, 800), (14.0, 2800), (2.0, 800)],
            references: |tag| match tag {
                "delta" => vec![Reference {
                    observable: "x".into(),
                    value: 2.0,
                    oracle: "free drift: x0 + (p0/m) t' with t' = 1".into(),
                }],
                "uniform" => vec![Reference {
                    observable: "x".into(),
                    value: 2.0,
                    oracle: "free drift at the mean readout time: x0 + (p0/m) * 1".into(),
                }],
                _ => vec![],
            },
        },
        SystemEntry {
            name: "harmonic-coherent",
            system: SystemSpec::Grid {
                x_min: -8.0,
                x_max: 8.0,
                n_points: 256,
                potential: PotentialSpec::Harmonic {
                    omega: 1.0,
                    center: 0.0,
                },
                initial: GridInitialSpec::Gaussian {
                    x0: 2.0,
                    p0: 0.0,
                    sigma: std::f64::consts::FRAC_1_SQRT_2,
                },
            },
            grids: [(2.0, 2000), (2.0, 2000), (14.0, 20000), (2.0, 2000)],
            references: |tag| match tag {
                "delta" => vec![Reference {
                    observable: "x".into(),
                    value: 2.0 * 1.0_f64.cos(),
                    oracle: "coherent center x0 cos(omega t') at t' = 1".into(),
                }],
                _ => vec![],
            },
        },
        SystemEntry {
            name: "harmonic-ground",
            system: SystemSpec::Grid {
                x_min: -8.0,
                x_max: 8.0,
                n_points: 256,
                potential: PotentialSpec::Harmonic {
                    omega: 1.0,
                    center: 0.0,
                },
                initial: GridInitialSpec::GroundState,
            },
            grids: [(2.0, 6400), (2.0, 2000), (14.0, 3500), (2.0, 2000)],
            references: |_| {
                vec![Reference {
                    observable: "H".into(),
                    value: 0.5,
                    oracle: "stationary eigenvalue hbar omega (n + 1/2), n = 0".into(),
                }]
            },
        },
        SystemEntry {
            name: "rabi-qubit",
            system: SystemSpec::Finite {
                hamiltonian: vec![
                    vec![[0.0, 0.0], [0.5, 0.0]],
                    vec![[0.5, 0.0], [0.0, 0.0]],
                ],
                initial: FiniteInitialSpec::Basis { index: 0 },
            },
            grids: [(2.0, 2000), (tau, 4000), (30.0, 6000), (2.0, 2000)],
            references: |tag| match tag {
                "delta" => vec![Reference {
                    observable: "sigma_z".into(),
                    value: 1.0_f64.cos(),
                    oracle: "two-level drive at unit frequency: cos(t') at t' = 1".into(),
                }],
                "exponential" => vec![Reference {
                    observable: "sigma_z".into(),
                    value: 0.5,
                    oracle: "closed form rate^2/(rate^2 + drive^2); truncation at t = 30 \
                             shifts it by under 1e-13"
                        .into(),
                }],
                _ => vec![],
            },
        },
        SystemEntry {
            name: "decay-superposition",
            system: SystemSpec::Finite {
                hamiltonian: vec![vec![[0.0, 0.0]; 4]; 4],
                initial: FiniteInitialSpec::Vector {
                    amplitudes: vec![
                        [0.0, 0.0],
                        [std::f64::consts::FRAC_1_SQRT_2, 0.0],
                        [std::f64::consts::FRAC_1_SQRT_2, 0.0],
                        [0.0, 0.0],
                    ],
                },
            },
            grids: [(2.0, 400), (2.0, 400), (14.0, 1400), (2.0, 400)],
            references: |_| {
                vec![Reference {
                    observable: "projector:1".into(),
                    value: 0.5,
                    oracle: "frozen equal superposition: |amplitude|^2 = 1/2".into(),
                }]
            },
        },
        SystemEntry {
            name: "square-well-superposition",
            system: SystemSpec::Grid {
                x_min: -8.0,
                x_max: 8.0,
                n_points: 256,
                potential: PotentialSpec::SquareWell {
                    half_width: 2.0,
                    height: 10.0,
                    wall_softness: 0.5,
                },
                initial: GridInitialSpec::EigenSuperposition { levels: vec![0, 1] },
            },
            grids: [(2.0, 2000), (2.0, 2000), (14.0, 20000), (2.0, 2000)],
            references: |_| vec![],
        },
    ]
}

/// All builtin scenarios: each system paired with each readout-time law.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for entry in builtin_systems() {
        for (tag, (t_max, n_steps)) in LAW_TAGS.iter().zip(entry.grids) {
            out.push(Scenario {
                name: format!("{}+{}", entry.name, tag),
                system: entry.system.clone(),
                time_grid: TimeGridSpec { t_max, n_steps },
                collapse: law_spec(tag, entry.name == "rabi-qubit"),
                constants: Constants {
                    hbar: 1.0,
                    mass: 1.0,
                },
                references: (entry.references)(tag),
            });
        }
    }
    out
}

/// Bare system names alias one canonical pairing each.
fn resolve_alias(name: &str) -> &str {
    match name {
        "free-gaussian" => "free-gaussian+uniform",
        "harmonic-coherent" => "harmonic-coherent+uniform",
        "harmonic-ground" => "harmonic-ground+delta",
        "rabi-qubit" => "rabi-qubit+exponential",
        "decay-superposition" => "decay-superposition+uniform",
        "square-well-superposition" => "square-well-superposition+uniform",
        other => other,
    }
}

pub fn builtin_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

/// Look up a builtin by exact name or bare-system alias.
pub fn builtin(name: &str) -> Result<Scenario> {
    let canonical = resolve_alias(name);
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == canonical)
        .ok_or_else(|| {
            Error::scenario(
                "name",
                format!(
                    "unknown scenario `{name}`; builtins: {}",
                    builtin_names().join(", ")
                ),
            )
        })
}
