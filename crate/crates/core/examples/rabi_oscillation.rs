//! Rabi oscillation of an Sb-like spin 7/2 driven at f_R = 684.2 Hz, lab
//! frame integration against the closed-form subspace rotation.

use std::f64::consts::TAU;

use ner::dynamics::{analytic_subspace_state, evolve_trajectory, leakage_of, IntegratorConfig, StateVector};
use ner::efg::EfgCoefficients;
use ner::hamiltonians::{h_single, rabi_angular_frequency, resonance_omega_single, DriveParams, NucleusParams};
use ner::spinops::SpinQuantum;

fn main() -> ner::Result<()> {
    let nucleus = NucleusParams::new(SpinQuantum::new(7)?, -4.9e-29, TAU * 5.553e6)?;
    let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -1e20, b_prime: 0.0 };
    let b0 = 1e-3;
    let e_amp = 6.366e-4;
    let omega = resonance_omega_single(&nucleus, &coeffs, 0.0, b0);
    let drive = DriveParams::new(e_amp, omega, 0.0, b0);
    let omega_r = rabi_angular_frequency(&nucleus, coeffs.a, e_amp);
    println!("drive at {:.3} kHz, f_R = {:.1} Hz", omega / TAU * 1e-3, omega_r.abs() / TAU);

    let ops = nucleus.operators();
    let model = h_single(&nucleus, &ops, &coeffs, &drive)?;
    let psi0 = StateVector::basis(ops.dim(), 0)?;
    let period = TAU / omega_r.abs();
    let times: Vec<f64> = (0..=8).map(|k| period * k as f64 / 8.0).collect();
    let states = evolve_trajectory(&model, &psi0, &times, &IntegratorConfig::default())?;
    println!("{:>10}  {:>10}  {:>10}  {:>12}  {:>10}", "t/us", "p(7/2)", "p(5/2)", "fidelity", "leakage");
    for (t, psi) in times.iter().zip(&states) {
        let expected = analytic_subspace_state(&nucleus, &coeffs, &drive, &psi0, *t, Some(&ops))?;
        let p = psi.populations();
        println!(
            "{:>10.2}  {:>10.6}  {:>10.6}  {:>12.9}  {:>10.2e}",
            t * 1e6,
            p[0],
            p[1],
            expected.overlap(psi).powi(2),
            leakage_of(psi)
        );
    }
    Ok(())
}
