//! Field-gradient response coefficients of a hydrogen-like atom.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use ner::efg::{coefficient_a, coefficient_b_prime, coefficient_c, efg_static, estimate_a_rough, EfgCoefficients};
use ner::hydrogenic::{AtomModel, Orbital, PhysicalConstants};
use num_complex::Complex64;

fn main() -> ner::Result<()> {
    let k = PhysicalConstants::default();
    println!("rough A at omega = 1e7 rad/s: {:.3e} m^-1", estimate_a_rough(&k, 1e7)?);

    let p0 = AtomModel::new(1, vec![Orbital::pure(2, 1, 0)?])?;
    println!("|210>: C = {:.4e} V/m^2", coefficient_c(&p0)?);
    println!("|210>: A(1e7) = {:.4e} m^-1", coefficient_a(&p0, 1e7)?);

    // first-order Stark state of n = 2
    let mix: BTreeMap<u32, Complex64> =
        [(0, Complex64::new(FRAC_1_SQRT_2, 0.0)), (1, Complex64::new(FRAC_1_SQRT_2, 0.0))].into_iter().collect();
    let stark = AtomModel::new(1, vec![Orbital::new(2, 0, mix)?])?;
    for n_max in [10, 50, 200] {
        let bp = coefficient_b_prime(&stark, n_max)?;
        println!(
            "Stark state: B'(n' <= {n_max:>3}) = {:.6e} m^-1, last shell {:.1e}, converged {}",
            bp.value, bp.last_increment, bp.converged
        );
    }

    let coeffs = EfgCoefficients {
        c: coefficient_c(&stark)?,
        b_prime: coefficient_b_prime(&stark, 200)?.value,
        ..Default::default()
    };
    let g = efg_static(&coeffs, 1e6);
    println!(
        "static gradient at E0 = 1 MV/m: diag = ({:.4e}, {:.4e}, {:.4e}) V/m^2",
        g.g[(0, 0)],
        g.g[(1, 1)],
        g.g[(2, 2)]
    );
    Ok(())
}
