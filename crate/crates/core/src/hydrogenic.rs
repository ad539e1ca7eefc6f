//! Hydrogen-like electron states: energies, radial and angular matrix
//! elements.
//!
//! Radial functions are evaluated in units of the Bohr radius and scaled
//! back to SI when returned. Angular integrals are over products of
//! spherical harmonics with equal `m`, so only the polar coordinate enters.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NerError, Result};
use crate::quadrature::{gauss_legendre_32, integrate};

/// SI constants used by every formula in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Coulomb constant, N m^2 / C^2.
    pub k_coulomb: f64,
    /// Elementary charge, C.
    pub e_charge: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Bohr radius, m.
    pub a0_bohr: f64,
    /// Electron mass, kg.
    pub m_electron: f64,
}

impl Default for PhysicalConstants {
    /// CODATA 2018.
    fn default() -> Self {
        Self {
            k_coulomb: 8.987_551_792_3e9,
            e_charge: 1.602_176_634e-19,
            hbar: 1.054_571_817e-34,
            a0_bohr: 5.291_772_109_03e-11,
            m_electron: 9.109_383_701_5e-31,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.k_coulomb, self.e_charge, self.hbar, self.a0_bohr, self.m_electron];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(NerError::InvalidParameter("physical constants must be positive".into()))
        }
    }
}

/// One electron in a superposition `sum_l c_l |n l m>` over a degenerate shell.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbital {
    n: u32,
    m: i32,
    coeffs: BTreeMap<u32, Complex64>,
    z_override: Option<u32>,
}

impl Orbital {
    pub fn new(n: u32, m: i32, coeffs: BTreeMap<u32, Complex64>) -> Result<Self> {
        if n < 1 {
            return Err(NerError::InvalidQuantumNumbers(format!("n = {n} must be >= 1")));
        }
        if m.unsigned_abs() >= n {
            return Err(NerError::InvalidQuantumNumbers(format!("|m| = {} must be < n = {n}", m.abs())));
        }
        if coeffs.is_empty() {
            return Err(NerError::InvalidQuantumNumbers("orbital has no components".into()));
        }
        for &l in coeffs.keys() {
            if l < m.unsigned_abs() || l >= n {
                return Err(NerError::InvalidQuantumNumbers(format!(
                    "l = {l} outside [{}, {}] for n = {n}, m = {m}",
                    m.abs(),
                    n - 1
                )));
            }
        }
        let norm: f64 = coeffs.values().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(NerError::NotNormalized(norm.sqrt()));
        }
        Ok(Self { n, m, coeffs, z_override: None })
    }

    /// A single `|n l m>` state.
    pub fn pure(n: u32, l: u32, m: i32) -> Result<Self> {
        Self::new(n, m, BTreeMap::from([(l, Complex64::new(1.0, 0.0))]))
    }

    /// Uses a per-electron nuclear charge instead of the atom's `Z`.
    pub fn with_z(mut self, z: u32) -> Self {
        self.z_override = Some(z);
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn coeffs(&self) -> &BTreeMap<u32, Complex64> {
        &self.coeffs
    }

    pub fn z_override(&self) -> Option<u32> {
        self.z_override
    }

    /// Same orbital with every amplitude multiplied by `e^{i alpha}`.
    pub fn with_global_phase(&self, alpha: f64) -> Self {
        let rot = Complex64::from_polar(1.0, alpha);
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= rot;
        }
        out
    }
}

/// The atom seen by the nucleus: nuclear charge plus independent electrons.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomModel {
    pub z_atomic: u32,
    pub electrons: Vec<Orbital>,
    /// Electron orbital gyromagnetic ratio, rad s^-1 T^-1.
    pub gamma_e: f64,
    /// Static magnetic field along z, T.
    pub b0: f64,
    pub constants: PhysicalConstants,
}

impl AtomModel {
    pub fn new(z_atomic: u32, electrons: Vec<Orbital>) -> Result<Self> {
        if z_atomic < 1 {
            return Err(NerError::InvalidParameter("Z must be >= 1".into()));
        }
        if electrons.is_empty() {
            return Err(NerError::InvalidParameter("atom needs at least one electron".into()));
        }
        Ok(Self { z_atomic, electrons, gamma_e: 0.0, b0: 0.0, constants: PhysicalConstants::default() })
    }

    pub fn with_field(mut self, gamma_e: f64, b0: f64) -> Self {
        self.gamma_e = gamma_e;
        self.b0 = b0;
        self
    }

    pub fn with_constants(mut self, constants: PhysicalConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn z_of(&self, electron: &Orbital) -> u32 {
        electron.z_override.unwrap_or(self.z_atomic)
    }
}

/// `E_nm = -Z^2 m_e (k e^2)^2 / (2 n^2 hbar^2) + gamma_e B0 m hbar`, in joules.
pub fn energy_level(atom: &AtomModel, n: u32, m: i32) -> Result<f64> {
    energy_level_z(atom, atom.z_atomic, n, m)
}

pub(crate) fn energy_level_z(atom: &AtomModel, z: u32, n: u32, m: i32) -> Result<f64> {
    if n < 1 || m.unsigned_abs() >= n {
        return Err(NerError::InvalidQuantumNumbers(format!("n = {n}, m = {m}")));
    }
    let c = &atom.constants;
    let ke2 = c.k_coulomb * c.e_charge * c.e_charge;
    let z = z as f64;
    let n = n as f64;
    let bohr = -z * z * c.m_electron * ke2 * ke2 / (2.0 * n * n * c.hbar * c.hbar);
    Ok(bohr + atom.gamma_e * atom.b0 * m as f64 * c.hbar)
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Generalized Laguerre polynomial `L_k^{(alpha)}(x)` by three-term recurrence.
fn laguerre(k: u32, alpha: f64, x: f64) -> f64 {
    let mut l0 = 1.0;
    if k == 0 {
        return l0;
    }
    let mut l1 = 1.0 + alpha - x;
    for j in 1..k {
        let j = j as f64;
        let l2 = ((2.0 * j + 1.0 + alpha - x) * l1 - (j + alpha) * l0) / (j + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Normalized radial function `R_nl` in units of `a0^{-3/2}`, argument in `a0`.
pub fn radial_function(z: u32, n: u32, l: u32, x: f64) -> f64 {
    let z = z as f64;
    let nf = n as f64;
    let rho = 2.0 * z * x / nf;
    let ln_norm = 1.5 * (2.0 * z / nf).ln() + 0.5 * (ln_factorial(n - l - 1) - (2.0 * nf).ln() - ln_factorial(n + l));
    ln_norm.exp() * rho.powi(l as i32) * (-rho / 2.0).exp() * laguerre(n - l - 1, (2 * l + 1) as f64, rho)
}

/// One shell `(n, l)` of the radial basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shell {
    pub n: u32,
    pub l: u32,
}

impl Shell {
    pub fn new(n: u32, l: u32) -> Result<Self> {
        if n < 1 || l >= n {
            return Err(NerError::InvalidQuantumNumbers(format!("(n, l) = ({n}, {l})")));
        }
        Ok(Self { n, l })
    }
}

pub const RADIAL_REL_TOL: f64 = 1e-10;

/// `∫ R_{n1 l1}(r) R_{n2 l2}(r) r^power r^2 dr`, in `m^power`.
///
/// Integrates on `(0, 50 n_min^2 a0 / Z)`; beyond that the slower-decaying
/// factor is bounded and the faster one has fallen by `e^{-50 n_min}`.
pub fn radial_integral(z: u32, bra: Shell, ket: Shell, power: i32, a0: f64) -> Result<f64> {
    if z < 1 {
        return Err(NerError::InvalidParameter("Z must be >= 1".into()));
    }
    Shell::new(bra.n, bra.l)?;
    Shell::new(ket.n, ket.l)?;
    let leading = bra.l as i32 + ket.l as i32 + 2 + power;
    if leading <= -1 {
        return Err(NerError::DivergentIntegral(format!("<{} {}| r^{power} |{} {}>", bra.n, bra.l, ket.n, ket.l)));
    }
    let n_min = bra.n.min(ket.n) as f64;
    let x_max = 50.0 * n_min * n_min / z as f64;
    let f = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        radial_function(z, bra.n, bra.l, x) * radial_function(z, ket.n, ket.l, x) * x.powi(power + 2)
    };
    // Split at the outermost classical turning region so nodes stay resolved.
    let n_max = bra.n.max(ket.n) as f64;
    let knee = (4.0 * n_max * n_max / z as f64).min(x_max);
    let inner = integrate(f, 0.0, knee, RADIAL_REL_TOL * 0.1, 1e-15, 4000)?;
    let outer = if knee < x_max {
        integrate(f, knee, x_max, RADIAL_REL_TOL * 0.1, 1e-15, 4000)?
    } else {
        crate::quadrature::QuadResult { value: 0.0, error: 0.0 }
    };
    let value = inner.value + outer.value;
    let error = inner.error + outer.error;
    // Tail past x_max: bounded by |f(x_max)| times the slower decay length.
    let tail = f(x_max).abs() * n_max / z as f64;
    if error + tail > (RADIAL_REL_TOL * value.abs()).max(1e-14) {
        return Err(NerError::QuadratureNonConvergence { value, error: error + tail });
    }
    Ok(value * a0.powi(power))
}

/// Polar kernels appearing in the EFG matrix elements (argument `x = cos θ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AngularKernel {
    CosMinusCos3,
    CosMinus3Cos3,
    OneMinus3Cos2,
    Cos,
}

impl AngularKernel {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            AngularKernel::CosMinusCos3 => x - x * x * x,
            AngularKernel::CosMinus3Cos3 => x - 3.0 * x * x * x,
            AngularKernel::OneMinus3Cos2 => 1.0 - 3.0 * x * x,
            AngularKernel::Cos => x,
        }
    }

    /// Polynomial degree in `cos θ`.
    pub fn degree(self) -> u32 {
        match self {
            AngularKernel::CosMinusCos3 | AngularKernel::CosMinus3Cos3 => 3,
            AngularKernel::OneMinus3Cos2 => 2,
            AngularKernel::Cos => 1,
        }
    }

    /// 0 for even kernels, 1 for odd.
    pub fn parity(self) -> u32 {
        self.degree() % 2
    }

    /// Whether `<l1 m|K|l2 m>` may be nonzero.
    pub fn allows(self, l1: u32, l2: u32) -> bool {
        (l1 + l2 + self.parity()).is_multiple_of(2) && l1.abs_diff(l2) <= self.degree()
    }
}

/// Normalized `N_lm P_l^m(x)` for all `l` in `m..=l_max` (upward recurrence in `l`).
fn normalized_legendre_column(l_max: u32, m: u32, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; (l_max + 1) as usize];
    if m > l_max {
        return out;
    }
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    let mut raw = vec![0.0; (l_max + 1) as usize];
    raw[m as usize] = pmm;
    if m < l_max {
        raw[(m + 1) as usize] = x * (2 * m + 1) as f64 * pmm;
    }
    for l in (m + 1)..l_max {
        let lf = l as f64;
        let mf = m as f64;
        raw[(l + 1) as usize] =
            ((2.0 * lf + 1.0) * x * raw[l as usize] - (lf + mf) * raw[(l - 1) as usize]) / (lf - mf + 1.0);
    }
    for l in m..=l_max {
        let ln_ratio = ln_factorial(l - m) - ln_factorial(l + m);
        let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt() * (0.5 * ln_ratio).exp();
        out[l as usize] = norm * raw[l as usize];
    }
    out
}

/// `∫ Y*_{l1 m} K(θ) Y_{l2 m} dΩ` by 32-point Gauss–Legendre in `cos θ`.
pub fn angular_integral(l1: u32, l2: u32, m: i32, kernel: AngularKernel) -> Result<f64> {
    let am = m.unsigned_abs();
    if am > l1.min(l2) {
        return Err(NerError::InvalidQuantumNumbers(format!(
            "|m| = {am} exceeds min(l1, l2) for l1 = {l1}, l2 = {l2}"
        )));
    }
    let (nodes, weights) = gauss_legendre_32();
    let l_max = l1.max(l2);
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        let col = normalized_legendre_column(l_max, am, x);
        acc += w * col[l1 as usize] * col[l2 as usize] * kernel.eval(x);
    }
    Ok(2.0 * std::f64::consts::PI * acc)
}

/// `<n1 l1 m| K(θ) r^power |n2 l2 m>`; exact zero when the kernel forbids it.
pub fn matrix_element(
    z: u32,
    bra: Shell,
    ket: Shell,
    m: i32,
    kernel: AngularKernel,
    power: i32,
    a0: f64,
) -> Result<f64> {
    if !kernel.allows(bra.l, ket.l) {
        return Ok(0.0);
    }
    let angular = angular_integral(bra.l, ket.l, m, kernel)?;
    if angular.abs() < 1e-14 {
        return Ok(0.0);
    }
    Ok(angular * radial_integral(z, bra, ket, power, a0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_inv_r3(z: u32, n: u32, l: u32) -> f64 {
        let (z, n, l) = (z as f64, n as f64, l as f64);
        z.powi(3) / (n.powi(3) * l * (l + 0.5) * (l + 1.0))
    }

    fn closed_form_inv_r2(z: u32, n: u32, l: u32) -> f64 {
        let (z, n, l) = (z as f64, n as f64, l as f64);
        z * z / (n.powi(3) * (l + 0.5))
    }

    #[test]
    fn ground_state_energy_is_one_rydberg() {
        let atom = AtomModel::new(1, vec![Orbital::pure(1, 0, 0).unwrap()]).unwrap();
        let e1 = energy_level(&atom, 1, 0).unwrap();
        // Rydberg energy hc R_inf = 2.1798723611e-18 J
        assert!((e1 + 2.179_872_361e-18).abs() / 2.18e-18 < 1e-4);
        let ev = e1 / atom.constants.e_charge;
        assert!((ev + 13.606).abs() < 1e-3);
        let e2 = energy_level(&atom, 2, 0).unwrap();
        assert!((e2 - e1 / 4.0).abs() < 1e-30);
    }

    #[test]
    fn zeeman_term_is_linear_in_m() {
        let atom = AtomModel::new(1, vec![Orbital::pure(3, 2, 0).unwrap()]).unwrap().with_field(8.794e10, 0.5);
        let step = atom.gamma_e * atom.b0 * atom.constants.hbar;
        for m in -1..2 {
            let d = energy_level(&atom, 3, m + 1).unwrap() - energy_level(&atom, 3, m).unwrap();
            assert!((d - step).abs() < 1e-9 * step);
        }
        assert!(energy_level(&atom, 2, 2).is_err());
        assert!(energy_level(&atom, 0, 0).is_err());
    }

    #[test]
    fn orbital_validation() {
        assert!(Orbital::pure(2, 2, 0).is_err());
        assert!(Orbital::pure(2, 0, 1).is_err());
        let bad = BTreeMap::from([(0, Complex64::new(0.5, 0.0))]);
        assert!(Orbital::new(2, 0, bad).is_err());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ok = BTreeMap::from([(0, Complex64::new(h, 0.0)), (1, Complex64::new(0.0, h))]);
        assert!(Orbital::new(2, 0, ok).is_ok());
    }

    #[test]
    fn radial_expectations_match_closed_forms() {
        let a0 = 1.0;
        assert!(
            (radial_integral(1, Shell { n: 2, l: 1 }, Shell { n: 2, l: 1 }, -3, a0).unwrap() - 1.0 / 24.0).abs()
                < 1e-12
        );
        assert!((radial_integral(1, Shell { n: 1, l: 0 }, Shell { n: 1, l: 0 }, -2, a0).unwrap() - 2.0).abs() < 1e-10);
        for &(n, l) in &[(1, 0), (2, 0), (2, 1), (3, 1), (3, 2)] {
            let s = Shell { n, l };
            let v = radial_integral(2, s, s, -2, a0).unwrap();
            assert!((v / closed_form_inv_r2(2, n, l) - 1.0).abs() < 1e-9);
            if l > 0 {
                let v = radial_integral(2, s, s, -3, a0).unwrap();
                assert!((v / closed_form_inv_r3(2, n, l) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn radial_normalization_and_orthogonality() {
        for &(n, l) in &[(1, 0), (2, 0), (2, 1), (5, 3)] {
            let s = Shell { n, l };
            assert!((radial_integral(1, s, s, 0, 1.0).unwrap() - 1.0).abs() < 1e-10);
        }
        let v = radial_integral(1, Shell { n: 1, l: 0 }, Shell { n: 3, l: 0 }, 0, 1.0).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn radial_scales_with_bohr_radius() {
        let s = Shell { n: 2, l: 1 };
        let a0 = 5.29e-11;
        let v = radial_integral(1, s, s, -3, a0).unwrap();
        assert!((v * a0.powi(3) - 1.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn radial_rejects_divergent_and_invalid() {
        let s = Shell { n: 1, l: 0 };
        assert!(matches!(radial_integral(1, s, s, -3, 1.0), Err(NerError::DivergentIntegral(_))));
        assert!(radial_integral(1, Shell { n: 1, l: 1 }, s, 1, 1.0).is_err());
    }

    #[test]
    fn radial_symmetric_under_swap() {
        let a = Shell { n: 3, l: 1 };
        let b = Shell { n: 2, l: 0 };
        let ab = radial_integral(1, a, b, 1, 1.0).unwrap();
        let ba = radial_integral(1, b, a, 1, 1.0).unwrap();
        assert!((ab - ba).abs() < 1e-13 * ab.abs().max(1.0));
    }

    #[test]
    fn angular_values() {
        assert!(angular_integral(0, 0, 0, AngularKernel::OneMinus3Cos2).unwrap().abs() < 1e-14);
        // <cos^2>_{Y10} = 3/5 by direct quadrature of (3/4π)cos^2 * cos^2 over the sphere
        let (x, w) = crate::quadrature::gauss_legendre(16);
        let cos2: f64 = x
            .iter()
            .zip(&w)
            .map(|(x, w)| w * 2.0 * std::f64::consts::PI * 3.0 / (4.0 * std::f64::consts::PI) * x.powi(4))
            .sum();
        assert!((cos2 - 0.6).abs() < 1e-14);
        let v = angular_integral(1, 1, 0, AngularKernel::OneMinus3Cos2).unwrap();
        assert!((v - (1.0 - 3.0 * cos2)).abs() < 1e-14);
        assert!((v + 0.8).abs() < 1e-14);
        for l in 0..4 {
            assert!(angular_integral(l, l, 0, AngularKernel::CosMinusCos3).unwrap().abs() < 1e-14);
        }
        assert!(angular_integral(1, 0, 1, AngularKernel::Cos).is_err());
    }

    #[test]
    fn angular_normalization() {
        for l in 0..6 {
            for m in 0..=l as i32 {
                let one = angular_integral(l, l, m, AngularKernel::Cos).unwrap();
                assert!(one.abs() < 1e-14);
            }
        }
        // <Y_10|cos|Y_00> = 1/sqrt(3)
        let v = angular_integral(1, 0, 0, AngularKernel::Cos).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn selection_rules_vanish() {
        let kernels = [
            AngularKernel::CosMinusCos3,
            AngularKernel::CosMinus3Cos3,
            AngularKernel::OneMinus3Cos2,
            AngularKernel::Cos,
        ];
        for k in kernels {
            for l1 in 0..8u32 {
                for l2 in 0..8u32 {
                    for m in 0..=(l1.min(l2) as i32) {
                        let v = angular_integral(l1, l2, m, k).unwrap();
                        if !k.allows(l1, l2) {
                            assert!(v.abs() < 1e-14, "{k:?} {l1} {l2} {m}: {v}");
                        }
                        let neg = angular_integral(l1, l2, -m, k).unwrap();
                        assert!((v - neg).abs() < 1e-14);
                    }
                }
            }
        }
    }
}
