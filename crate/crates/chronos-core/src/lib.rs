//! Quantum evolution when the readout time is itself a random variable.
//!
//! The textbook postulates produce expectation values at one sharp instant.
//! Here the instant the measurement happens is drawn from a density f(t) on
//! [0, T_max], and predictions are averaged over that draw: expectation
//! values become time-smeared averages, the state "under measurement" becomes
//! a mixed operator assembled from the whole trajectory, and position
//! statistics become a joint density over space and time with the usual
//! conditional/marginal (Bayes) structure.
//!
//! The crate is organized as a pipeline:
//!
//! * [`grid`], [`state`], [`operator`]: discretized states and observables;
//! * [`propagate`]: unitary evolution on a fixed time grid (split-operator
//!   spectral stepping for grids, exact spectral evolution for small
//!   matrices);
//! * [`collapse`]: the readout-time densities f(t);
//! * [`smear`]: smeared expectations, the smeared state, and time-resolution
//!   diagnostics;
//! * [`spacetime`]: the joint density p(x, t) and its marginals and
//!   conditionals;
//! * [`sampler`]: synthetic measurement records drawn from p(x, t);
//! * [`timeop`]: the time-label operator, the generator i h_bar d/dt, and
//!   their commutator measured on the discrete grid;
//! * [`scenario`]: built-in and file-defined simulation setups.

pub mod collapse;
pub mod error;
mod fft;
pub mod grid;
pub mod operator;
pub mod propagate;
pub mod quad;
pub mod sampler;
pub mod scenario;
pub mod smear;
pub mod spacetime;
pub mod state;
pub mod stats;
pub mod textio;
pub mod timeop;
pub mod tolerances;

pub use collapse::CollapseDistribution;
pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use operator::LinearOperator;
pub use propagate::{TimeGrid, Trajectory};
pub use scenario::Scenario;
pub use smear::{SmearReport, SmearedState};
pub use spacetime::JointDensity;
pub use state::{Representation, StateVector};
