//! Static-field control: the linear quadrupole Stark shift moves the
//! qubit resonance, so a fixed-frequency drive can be switched on and off.

use std::f64::consts::{PI, TAU};

use ner::dynamics::{evolve, rotating_hamiltonian, IntegratorConfig, StateVector};
use ner::efg::EfgCoefficients;
use ner::hamiltonians::{
    h_lqse, rabi_angular_frequency, resonance_omega_single, DriveParams, HamiltonianModel, NucleusParams,
};
use ner::spinops::SpinQuantum;

fn main() -> ner::Result<()> {
    let nucleus = NucleusParams::new(SpinQuantum::new(7)?, -4.9e-29, TAU * 5.553e6)?;
    let ops = nucleus.operators();
    let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -1e20, b_prime: 5e9 };
    let b0 = 0.01;
    let e_amp = 1e-3;
    let omega = resonance_omega_single(&nucleus, &coeffs, 0.0, b0);
    let omega_r = rabi_angular_frequency(&nucleus, coeffs.a, e_amp).abs();
    let t_pi = PI / omega_r;
    let psi0 = StateVector::basis(ops.dim(), 0)?;
    println!("drive fixed at the E0 = 0 line, f_R = {:.1} Hz", omega_r / TAU);
    println!("{:>10}  {:>16}  {:>12}  {:>14}", "E0 V/m", "7/2-5/2 line Hz", "shift Hz", "p(5/2) after pi");
    for e0 in [0.0, 1e6, 5e6, 1e7, 3e7, 1e8] {
        let h = h_lqse(&nucleus, &ops, &coeffs, e0, b0)?;
        let line = (h[(0, 0)].re - h[(1, 1)].re) / TAU;
        let shift = (resonance_omega_single(&nucleus, &coeffs, e0, b0) - omega) / TAU;
        let drive = DriveParams::new(e_amp, omega, 0.0, b0).with_static_field(e0);
        let model = HamiltonianModel::constant(rotating_hamiltonian(&nucleus, &ops, &coeffs, &drive)?);
        let psi = evolve(&model, &psi0, t_pi, &IntegratorConfig::default())?;
        println!("{e0:>10.0e}  {line:>16.3}  {shift:>12.3}  {:>14.6}", psi.populations()[1]);
    }
    Ok(())
}
