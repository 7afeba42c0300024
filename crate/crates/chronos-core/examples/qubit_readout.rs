//! A qubit precessing under sigma_x, read out at an exponentially
//! distributed random time: the smeared average and the smeared state.

use chronos_core::operator::pauli_z;
use chronos_core::scenario::{build_observable, builtin};
use chronos_core::smear::{build_omega, smeared_expectation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Built-in setup: two-level system, readout law truncated at the window.
    let scenario = builtin("rabi-qubit+exponential")?;
    let run = scenario.realize()?;

    // Average <sigma_z> over the readout-time density.
    let op = build_observable("sigma_z", &run.trajectory)?;
    let report = smeared_expectation(&run.trajectory, &run.collapse, &op)?;
    println!("smeared <sigma_z> = {:.12}", report.value);
    println!("integrated with   {}", report.rule);

    // The same number through the smeared state: Tr(Omega A).
    let omega = build_omega(&run.trajectory, &run.collapse)?;
    let matrix = omega.dense_matrix().expect("two-level system stays dense");
    println!("trace of Omega    = {:.12}", matrix.trace().re);
    let via_trace = (matrix * pauli_z().to_dense(run.trajectory.repr())?).trace().re;
    println!("Tr(Omega sigma_z) = {via_trace:.12}");
    Ok(())
}
