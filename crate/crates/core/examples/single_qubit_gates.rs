//! Arbitrary single-qubit rotations from one resonant pulse each.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ner::dynamics::{qubit_rotation, IntegratorConfig};
use ner::efg::EfgCoefficients;
use ner::gates::{pulse_for_rotation, rotation_report};
use ner::hamiltonians::NucleusParams;
use ner::spinops::SpinQuantum;

fn main() -> ner::Result<()> {
    let nucleus = NucleusParams::new(SpinQuantum::new(7)?, -4.9e-29, TAU * 5.553e6)?;
    let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -1e20, b_prime: 5e9 };
    let (b0, e0, e_amp) = (0.01, 0.0, 6.366e-4);
    let cfg = IntegratorConfig::default();
    println!(
        "{:>8}  {:>8}  {:>10}  {:>14}  {:>14}  {:>10}",
        "angle", "axis", "t/us", "1-F closed", "1-F full", "leakage"
    );
    for (name, axis, angle) in
        [("X", 0.0, PI), ("Y", FRAC_PI_2, PI), ("X/2", 0.0, FRAC_PI_2), ("-Y/2", FRAC_PI_2, -FRAC_PI_2)]
    {
        let pulse = pulse_for_rotation(&nucleus, &coeffs, b0, e0, e_amp, axis, angle)?;
        let drive = pulse.drive(b0, e0);
        let target = qubit_rotation(angle, axis);
        let closed = rotation_report(&nucleus, &coeffs, &drive, pulse.duration, &target, None)?;
        let full = rotation_report(&nucleus, &coeffs, &drive, pulse.duration, &target, Some(&cfg))?;
        println!(
            "{name:>8}  {axis:>8.4}  {:>10.2}  {:>14.2e}  {:>14.2e}  {:>10.2e}",
            pulse.duration * 1e6,
            1.0 - closed.fidelity,
            1.0 - full.fidelity,
            full.leakage
        );
    }
    Ok(())
}
