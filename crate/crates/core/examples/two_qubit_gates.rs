//! CZ and CNOT between two J-coupled spin 3/2 nuclei, with the closed-form
//! two-qubit propagator checked against brute-force evolution.

use std::f64::consts::TAU;

use ner::dynamics::{
    numerical_propagator, qubit_pair_indices, two_nucleus_to_rotating, two_qubit_propagator_factored, IntegratorConfig,
};
use ner::gates::{
    cnot_matrix, cz_matrix, ideal_report, simulated_report, synthesize_cnot, synthesize_cz, QubitDrive, SimulationSpace,
};
use ner::hamiltonians::{h_two_model, JSchedule, JSegment, NucleusParams, TwoQubitParams};
use ner::linalg::{max_abs, sub_matrix};
use ner::spinops::SpinQuantum;

fn main() -> ner::Result<()> {
    let s = SpinQuantum::new(3)?;
    let params = TwoQubitParams {
        nucleus1: NucleusParams::new(s, -4.9e-29, TAU * 5.553e6)?,
        nucleus2: NucleusParams::new(s, -4.0e-29, TAU * 5.4e6)?,
        c1: -1.0e19,
        c2: -1.1e19,
        b_prime1: 5e9,
        b_prime2: 4e9,
        e1: 2e5,
        e2: 3e5,
        j_schedule: JSchedule::default(),
        b0: 0.01,
        frame_omega: None,
    };

    let pulsed_j = JSchedule {
        segments: vec![
            JSegment { duration: 1e-3, j_hz: 120.0 },
            JSegment { duration: 5e-4, j_hz: -40.0 },
            JSegment { duration: 2e-3, j_hz: 300.0 },
        ],
    };
    let coupled = TwoQubitParams { j_schedule: pulsed_j, ..params.clone() };
    let t = coupled.j_schedule.total_duration();
    let u_lab = numerical_propagator(&h_two_model(&coupled)?, 0.0, t, &IntegratorConfig::with_tol(1e-12))?;
    let u_rot = two_nucleus_to_rotating(u_lab.matrix(), s, coupled.frame(), t);
    let block = sub_matrix(&u_rot, &qubit_pair_indices(s));
    let closed = two_qubit_propagator_factored(&coupled, t)?.product();
    println!("factorized vs full 16x16 evolution: max |dU| = {:.2e}", max_abs(&(block - closed)));

    let cz = synthesize_cz(&params, 250.0)?;
    println!("\nCZ schedule ({:.3} ms):", cz.total_duration() * 1e3);
    for seg in &cz.segments {
        println!(
            "  {:?}: {:.4} ms, e1 = {:.1e}, e2 = {:.1e}, J = {} Hz",
            seg.kind,
            seg.duration * 1e3,
            seg.e1,
            seg.e2,
            seg.j_hz
        );
    }
    let full = simulated_report(&params, &cz, &cz_matrix(), SimulationSpace::Full, &IntegratorConfig::default())?;
    println!(
        "  1-F closed form {:.1e}, full simulation {:.1e}",
        1.0 - ideal_report(&params, &cz, &cz_matrix())?.fidelity,
        1.0 - full.fidelity
    );

    let cnot = synthesize_cnot(&params, 300.0, &QubitDrive { a: 8e19, e_amp: 4e-3 })?;
    println!("\nCNOT schedule ({:.3} ms):", cnot.total_duration() * 1e3);
    for seg in &cnot.segments {
        println!("  {:?}: {:.4} ms", seg.kind, seg.duration * 1e3);
    }
    let sim = simulated_report(
        &params,
        &cnot,
        &cnot_matrix(),
        SimulationSpace::Subspace,
        &IntegratorConfig::with_tol(1e-12),
    )?;
    println!(
        "  1-F closed form {:.1e}, simulated {:.1e}",
        1.0 - ideal_report(&params, &cnot, &cnot_matrix())?.fidelity,
        1.0 - sim.fidelity
    );
    Ok(())
}
