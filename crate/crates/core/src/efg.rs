//! Electric-field-gradient response of the atomic electrons.
//!
//! `A`, `B` and `C` convert an applied oscillating field into the gradient
//! tensor at the nucleus; `B'` does the same for a static field along `z`.
//! Each coefficient is summed independently over the electrons of an
//! [`AtomModel`].

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NerError, Result};
use crate::hydrogenic::{energy_level_z, matrix_element, AngularKernel, AtomModel, Orbital, PhysicalConstants, Shell};

/// Gradient response coefficients.
///
/// `a`, `b`, `b_prime` in m^-1, `c` in V m^-2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EfgCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub b_prime: f64,
}

/// `g[α][β] = ∂_α E_β` at the nucleus, V m^-2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfgTensor {
    pub g: Matrix3<f64>,
}

impl EfgTensor {
    pub fn zero() -> Self {
        Self { g: Matrix3::zeros() }
    }

    /// Axially symmetric `diag(v, v, -2v)`.
    pub fn axial(v: f64) -> Self {
        Self { g: Matrix3::from_diagonal(&nalgebra::Vector3::new(v, v, -2.0 * v)) }
    }

    pub fn trace(&self) -> f64 {
        self.g.trace()
    }

    /// `max |g - gᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        (self.g - self.g.transpose()).amax()
    }

    /// Largest absolute entry, the scale for relative checks.
    pub fn scale(&self) -> f64 {
        self.g.amax()
    }

    /// Symmetric and traceless to `rel` relative to the largest entry.
    pub fn satisfies_gauss_law(&self, rel: f64) -> bool {
        let s = self.scale();
        self.asymmetry() <= rel * s && self.trace().abs() <= rel * s
    }
}

type ElectronTerm = fn(&AtomModel, &Orbital) -> Result<f64>;

fn sum_over_electrons(atom: &AtomModel, term: ElectronTerm) -> Result<f64> {
    atom.constants.validate()?;
    let parts: Result<Vec<f64>> = atom.electrons.par_iter().map(|e| term(atom, e)).collect();
    Ok(parts?.iter().sum())
}

/// `Σ_{l', l} <n l' m| K r^power |n l m> w(c*_{l'} c_l)` for one electron.
fn shell_double_sum(
    atom: &AtomModel,
    e: &Orbital,
    kernel: AngularKernel,
    power: i32,
    weight: fn(Complex64) -> f64,
) -> Result<f64> {
    let z = atom.z_of(e);
    let a0 = atom.constants.a0_bohr;
    let mut acc = 0.0;
    for (&lp, cp) in e.coeffs() {
        for (&l, c) in e.coeffs() {
            let w = weight(cp.conj() * c);
            if w == 0.0 {
                continue;
            }
            let me = matrix_element(z, Shell { n: e.n(), l: lp }, Shell { n: e.n(), l }, e.m(), kernel, power, a0)?;
            acc += me * w;
        }
    }
    Ok(acc)
}

fn c_term(atom: &AtomModel, e: &Orbital) -> Result<f64> {
    let k = &atom.constants;
    let sum = shell_double_sum(atom, e, AngularKernel::OneMinus3Cos2, -3, |w| w.re)?;
    Ok(0.5 * k.k_coulomb * k.e_charge * sum)
}

/// Static gradient coefficient `C`, V m^-2.
///
/// Uses `Re(c*_{l'} c_l)`, the Hermitian part of the bilinear weight.
pub fn coefficient_c(atom: &AtomModel) -> Result<f64> {
    sum_over_electrons(atom, c_term)
}

fn oscillating_coefficient(atom: &AtomModel, omega: f64, kernel: AngularKernel) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(NerError::InvalidParameter(format!("drive frequency must be > 0, got {omega}")));
    }
    atom.constants.validate()?;
    let k = &atom.constants;
    let prefactor = k.k_coulomb * k.e_charge * k.e_charge / (k.hbar * omega);
    let parts: Result<Vec<f64>> =
        atom.electrons.par_iter().map(|e| shell_double_sum(atom, e, kernel, -2, |w| w.im)).collect();
    Ok(prefactor * parts?.iter().sum::<f64>())
}

/// Transverse coefficient `A` (m^-1), evaluated term by term as written:
/// `(k e^2 / ħω) Σ <n l' m|(cosθ - cos³θ)/r²|n l m> Im(c*_{l'} c_l)`.
///
/// The matrix element is symmetric in `(l', l)` while the weight is
/// antisymmetric, so the sum cancels pairwise for every input. Callers that
/// need a working value pass `A` directly through [`EfgCoefficients`] or use
/// [`estimate_a_rough`].
pub fn coefficient_a(atom: &AtomModel, omega: f64) -> Result<f64> {
    oscillating_coefficient(atom, omega, AngularKernel::CosMinusCos3)
}

/// Longitudinal coefficient `B` (m^-1), same structure as [`coefficient_a`]
/// with kernel `cosθ - 3cos³θ`.
pub fn coefficient_b(atom: &AtomModel, omega: f64) -> Result<f64> {
    oscillating_coefficient(atom, omega, AngularKernel::CosMinus3Cos3)
}

/// Truncated second-order sum for `B'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BPrimeResult {
    /// m^-1
    pub value: f64,
    /// Contribution of the last included shell `n' = n_prime_max`.
    pub last_increment: f64,
    /// `|last_increment| <= 1e-6 |value|`.
    pub converged: bool,
    pub n_prime_max: u32,
}

pub const B_PRIME_CONVERGENCE: f64 = 1e-6;

/// Contribution of one intermediate shell `n'` to `B'` for one electron.
fn b_prime_shell(atom: &AtomModel, e: &Orbital, n_prime: u32) -> Result<f64> {
    let z = atom.z_of(e);
    let k = &atom.constants;
    let a0 = k.a0_bohr;
    let n = e.n();
    let m = e.m();
    if n_prime <= m.unsigned_abs() {
        return Ok(0.0);
    }
    let gap = energy_level_z(atom, z, n, m)? - energy_level_z(atom, z, n_prime, m)?;
    let mut acc = 0.0;
    for lp in m.unsigned_abs()..n_prime {
        let mid = Shell { n: n_prime, l: lp };
        for (&l, c) in e.coeffs() {
            // <n' l' m| z |n l m> with z = r cosθ
            let dipole = matrix_element(z, mid, Shell { n, l }, m, AngularKernel::Cos, 1, a0)?;
            if dipole == 0.0 {
                continue;
            }
            for (&lpp, cpp) in e.coeffs() {
                let w = (cpp.conj() * c).re;
                if w == 0.0 {
                    continue;
                }
                let grad = matrix_element(z, Shell { n, l: lpp }, mid, m, AngularKernel::OneMinus3Cos2, -3, a0)?;
                acc += grad * dipole / gap * w;
            }
        }
    }
    Ok(k.k_coulomb * k.e_charge * k.e_charge * acc)
}

/// Static-field coefficient `B'` (m^-1) from first-order Stark mixing with
/// bound shells `n' != n`, `n' <= n_prime_max`.
pub fn coefficient_b_prime(atom: &AtomModel, n_prime_max: u32) -> Result<BPrimeResult> {
    atom.constants.validate()?;
    if let Some(e) = atom.electrons.iter().find(|e| e.n() >= n_prime_max) {
        return Err(NerError::InvalidParameter(format!(
            "n_prime_max = {n_prime_max} must exceed every electron's n (found n = {})",
            e.n()
        )));
    }
    let per_shell: Result<Vec<f64>> = (1..=n_prime_max)
        .into_par_iter()
        .map(|np| {
            atom.electrons.iter().filter(|e| e.n() != np).map(|e| b_prime_shell(atom, e, np)).sum::<Result<f64>>()
        })
        .collect();
    let per_shell = per_shell?;
    let value: f64 = per_shell.iter().sum();
    let last_increment = *per_shell.last().unwrap_or(&0.0);
    Ok(BPrimeResult {
        value,
        last_increment,
        converged: last_increment.abs() <= B_PRIME_CONVERGENCE * value.abs(),
        n_prime_max,
    })
}

/// Gradient tensor under the oscillating drive, with `Ẽ(t) = -ω ∫₀ᵗ E dt`.
pub fn efg_oscillating(coeffs: &EfgCoefficients, e_tilde: [f64; 3]) -> EfgTensor {
    let EfgCoefficients { a, b, c, .. } = *coeffs;
    let diag = c - b * e_tilde[2];
    let xz = -3.0 * a * e_tilde[0];
    let yz = -3.0 * a * e_tilde[1];
    #[rustfmt::skip]
    let g = Matrix3::new(
        diag, 0.0,  xz,
        0.0,  diag, yz,
        xz,   yz,   -2.0 * diag,
    );
    EfgTensor { g }
}

/// Gradient tensor under a static field `E0` along `z`.
pub fn efg_static(coeffs: &EfgCoefficients, e0: f64) -> EfgTensor {
    EfgTensor::axial(coeffs.c + coeffs.b_prime * e0)
}

/// Order-of-magnitude transverse coefficient `k e^2 / (ħ ω a0^2)`, m^-1.
pub fn estimate_a_rough(constants: &PhysicalConstants, omega_ref: f64) -> Result<f64> {
    if !(omega_ref > 0.0) {
        return Err(NerError::InvalidParameter(format!("omega_ref must be > 0, got {omega_ref}")));
    }
    let k = constants;
    Ok(k.k_coulomb * k.e_charge * k.e_charge / (k.hbar * omega_ref * k.a0_bohr * k.a0_bohr))
}
