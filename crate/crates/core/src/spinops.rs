//! Spin operator algebra for arbitrary spin `S`.
//!
//! All matrices are dimensionless (divided by ħ) and expressed in the `S_z`
//! eigenbasis ordered `m = S, S-1, ..., -S`, so the qubit subspace
//! `{S, S-1}` is the top-left 2x2 block.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{NerError, Result};
use crate::CMatrix;

/// A spin quantum number stored as `2S` so half-integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinQuantum {
    two_s: u32,
}

impl SpinQuantum {
    pub fn new(two_s: i64) -> Result<Self> {
        if two_s < 1 || two_s > u32::MAX as i64 {
            return Err(NerError::InvalidSpin(two_s));
        }
        Ok(Self { two_s: two_s as u32 })
    }

    pub fn half() -> Self {
        Self { two_s: 1 }
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn value(self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    pub fn is_half_integer(self) -> bool {
        self.two_s % 2 == 1
    }

    /// `m` values in basis order, descending from `S` to `-S`.
    pub fn m_values(self) -> impl Iterator<Item = f64> {
        let s = self.value();
        (0..self.dim()).map(move |k| s - k as f64)
    }

    /// Basis index of the level with `2m = two_m`.
    pub fn index_of(self, two_m: i64) -> Option<usize> {
        let top = self.two_s as i64;
        if two_m.abs() > top || (top - two_m) % 2 != 0 {
            return None;
        }
        Some(((top - two_m) / 2) as usize)
    }

    /// Text label of the `k`-th basis level, e.g. `7/2`, `-1/2`, `1`.
    pub fn m_label(self, k: usize) -> String {
        let two_m = self.two_s as i64 - 2 * k as i64;
        format_half(two_m)
    }
}

fn format_half(two_x: i64) -> String {
    if two_x % 2 == 0 {
        format!("{}", two_x / 2)
    } else {
        format!("{}/2", two_x)
    }
}

impl fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_half(self.two_s as i64))
    }
}

impl FromStr for SpinQuantum {
    type Err = NerError;

    /// Accepts `"k/2"` or an integer.
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let parse = |x: &str| x.trim().parse::<i64>().map_err(|_| NerError::SpinParse(text.into()));
        let two_s = match t.split_once('/') {
            Some((num, den)) => {
                if parse(den)? != 2 {
                    return Err(NerError::SpinParse(text.into()));
                }
                parse(num)?
            }
            None => 2 * parse(t)?,
        };
        SpinQuantum::new(two_s)
    }
}

/// Cartesian spin matrices for one spin.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub s: SpinQuantum,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
}

impl SpinOperators {
    pub fn new(s: SpinQuantum) -> Self {
        make_spin_operators(s)
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim())
    }

    /// `S_x^2 + S_y^2 + S_z^2`.
    pub fn casimir(&self) -> CMatrix {
        &self.sx * &self.sx + &self.sy * &self.sy + &self.sz * &self.sz
    }

    /// `{S_x, S_z}`: transverse drive operator, x quadrature.
    pub fn drive_x(&self) -> CMatrix {
        anticommutator_unchecked(&self.sx, &self.sz)
    }

    /// `{S_y, S_z}`: transverse drive operator, y quadrature.
    pub fn drive_y(&self) -> CMatrix {
        anticommutator_unchecked(&self.sy, &self.sz)
    }

    pub fn sz_squared(&self) -> CMatrix {
        &self.sz * &self.sz
    }

    /// The three Cartesian components indexed 0, 1, 2 = x, y, z.
    pub fn component(&self, axis: usize) -> &CMatrix {
        match axis {
            0 => &self.sx,
            1 => &self.sy,
            _ => &self.sz,
        }
    }
}

/// Builds `S_x, S_y, S_z` from the ladder operators.
///
/// `<m+1|S_+|m> = sqrt(S(S+1) - m(m+1))`, `S_x = (S_+ + S_-)/2`,
/// `S_y = (S_+ - S_-)/(2i)`.
pub fn make_spin_operators(s: SpinQuantum) -> SpinOperators {
    let d = s.dim();
    let sv = s.value();
    let mut splus = CMatrix::zeros(d, d);
    let mut sz = CMatrix::zeros(d, d);
    for (k, m) in s.m_values().enumerate() {
        sz[(k, k)] = Complex64::new(m, 0.0);
        // S_+ maps row k+1 (m) to row k (m+1).
        if k + 1 < d {
            let m_low = m - 1.0;
            let amp = (sv * (sv + 1.0) - m_low * (m_low + 1.0)).sqrt();
            splus[(k, k + 1)] = Complex64::new(amp, 0.0);
        }
    }
    let sminus = splus.adjoint();
    let sx = (&splus + &sminus).scale(0.5);
    let sy = (&splus - &sminus) * Complex64::new(0.0, -0.5);
    SpinOperators { s, sx, sy, sz }
}

/// `ab + ba`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(NerError::DimensionMismatch(format!("anticommutator of {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(anticommutator_unchecked(a, b))
}

fn anticommutator_unchecked(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Spin matrices restricted to the qubit subspace `{S, S-1}`.
///
/// `px = sqrt(2S) sx_half`, `py = sqrt(2S) sy_half`,
/// `pz = sz_half + shift * I` with `shift = (2S-1)/2`.
#[derive(Debug, Clone)]
pub struct QubitProjection {
    pub s: SpinQuantum,
    pub px: CMatrix,
    pub py: CMatrix,
    pub pz: CMatrix,
    pub shift: f64,
}

pub fn project_qubit_subspace(s: SpinQuantum) -> QubitProjection {
    let half = make_spin_operators(SpinQuantum::half());
    let root = (s.two_s() as f64).sqrt();
    let shift = (s.two_s() as f64 - 1.0) / 2.0;
    let pz = &half.sz + CMatrix::identity(2, 2).scale(shift);
    QubitProjection { s, px: half.sx.scale(root), py: half.sy.scale(root), pz, shift }
}

/// Tensor product `op1 ⊗ op2` (first factor is the slow index).
pub fn two_spin_embed(op1: &CMatrix, op2: &CMatrix) -> Result<CMatrix> {
    if !op1.is_square() || !op2.is_square() {
        return Err(NerError::DimensionMismatch(format!(
            "two_spin_embed needs square factors, got {:?} and {:?}",
            op1.shape(),
            op2.shape()
        )));
    }
    Ok(op1.kronecker(op2))
}

/// Pauli-over-two matrices `(sx, sy, sz)` for the qubit subspace.
pub fn half_spin() -> SpinOperators {
    make_spin_operators(SpinQuantum::half())
}

pub(crate) fn real_diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn spins() -> Vec<SpinQuantum> {
        [1, 2, 3, 4, 5, 7].iter().map(|&t| SpinQuantum::new(t).unwrap()).collect()
    }

    #[test]
    fn rejects_zero_spin() {
        assert!(SpinQuantum::new(0).is_err());
        assert!(SpinQuantum::new(-3).is_err());
    }

    #[test]
    fn parses_spin_text() {
        assert_eq!("7/2".parse::<SpinQuantum>().unwrap().two_s(), 7);
        assert_eq!("1".parse::<SpinQuantum>().unwrap().two_s(), 2);
        assert_eq!(" 3/2 ".parse::<SpinQuantum>().unwrap().two_s(), 3);
        assert!("3/4".parse::<SpinQuantum>().is_err());
        assert!("0".parse::<SpinQuantum>().is_err());
        assert!("abc".parse::<SpinQuantum>().is_err());
        assert_eq!(SpinQuantum::new(7).unwrap().to_string(), "7/2");
        assert_eq!(SpinQuantum::new(7).unwrap().m_label(7), "-7/2");
        assert_eq!(SpinQuantum::new(2).unwrap().m_label(1), "0");
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let ops = half_spin();
        assert!((ops.sx[(0, 1)].re - 0.5).abs() < 1e-15);
        assert!((ops.sx[(1, 0)].re - 0.5).abs() < 1e-15);
        assert!((ops.sz[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((ops.sz[(1, 1)].re + 0.5).abs() < 1e-15);
        assert!((ops.sy[(0, 1)] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn spin_one_ladder_element() {
        let ops = make_spin_operators(SpinQuantum::new(2).unwrap());
        // <m+1|Sx|m> = sqrt(S(S+1) - m(m+1))/2 with S=1, m=0.
        let expected = 0.5 * (1.0f64 * 2.0 - 0.0).sqrt();
        assert!((ops.sx[(0, 1)].re - expected).abs() < 1e-15);
        assert!((expected - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn algebra_identities_hold() {
        let i = Complex64::new(0.0, 1.0);
        for s in spins() {
            let ops = make_spin_operators(s);
            let d = s.dim();
            for op in [&ops.sx, &ops.sy, &ops.sz] {
                assert!(max_abs(&(op - op.adjoint())) < 1e-12);
            }
            let comm = |a: &CMatrix, b: &CMatrix| a * b - b * a;
            assert!(max_abs(&(comm(&ops.sx, &ops.sy) - ops.sz.clone() * i)) < 1e-12);
            assert!(max_abs(&(comm(&ops.sy, &ops.sz) - ops.sx.clone() * i)) < 1e-12);
            assert!(max_abs(&(comm(&ops.sz, &ops.sx) - ops.sy.clone() * i)) < 1e-12);
            let sv = s.value();
            let casimir = CMatrix::identity(d, d).scale(sv * (sv + 1.0));
            assert!(max_abs(&(ops.casimir() - casimir)) < 1e-12);
        }
    }

    #[test]
    fn anticommutator_spin_three_halves() {
        let ops = make_spin_operators(SpinQuantum::new(3).unwrap());
        let ac = anticommutator(&ops.sx, &ops.sz).unwrap();
        // oracle: direct product of matrices
        let direct = &ops.sx * &ops.sz + &ops.sz * &ops.sx;
        assert!((ac[(0, 1)] - direct[(0, 1)]).norm() < 1e-15);
        assert!((ac[(0, 1)].re - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(ac[(1, 2)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn anticommutator_rejects_mismatch() {
        let a = CMatrix::identity(2, 2);
        let b = CMatrix::identity(3, 3);
        assert!(anticommutator(&a, &b).is_err());
    }

    #[test]
    fn drive_operator_zero_pattern() {
        for s in spins() {
            let ops = make_spin_operators(s);
            let (dx, dy) = (ops.drive_x(), ops.drive_y());
            let m: Vec<f64> = s.m_values().collect();
            for j in 0..s.dim() {
                for k in 0..s.dim() {
                    let forbidden = (m[j] - m[k]).abs() != 1.0 || m[j] + m[k] == 0.0;
                    if forbidden {
                        assert_eq!(dx[(j, k)].norm(), 0.0, "S={s} ({j},{k})");
                        assert_eq!(dy[(j, k)].norm(), 0.0, "S={s} ({j},{k})");
                    }
                }
            }
        }
        let half = half_spin();
        assert_eq!(max_abs(&half.drive_x()), 0.0);
        assert_eq!(max_abs(&half.drive_y()), 0.0);
    }

    #[test]
    fn projection_matches_top_block() {
        for s in spins() {
            let ops = make_spin_operators(s);
            let p = project_qubit_subspace(s);
            let block = |m: &CMatrix| m.view((0, 0), (2, 2)).into_owned();
            assert!(max_abs(&(block(&ops.sx) - &p.px)) < 1e-12);
            assert!(max_abs(&(block(&ops.sy) - &p.py)) < 1e-12);
            assert!(max_abs(&(block(&ops.sz) - &p.pz)) < 1e-12);
        }
        let p = project_qubit_subspace(SpinQuantum::new(3).unwrap());
        assert_eq!(p.shift, 1.0);
        assert!((p.px[(0, 1)].re - 3f64.sqrt() * 0.5).abs() < 1e-15);
        let p = project_qubit_subspace(SpinQuantum::new(7).unwrap());
        assert_eq!(p.shift, 3.0);
        assert!((p.px[(0, 1)].re - 7f64.sqrt() * 0.5).abs() < 1e-15);
        let p = project_qubit_subspace(SpinQuantum::half());
        assert_eq!(p.shift, 0.0);
    }

    #[test]
    fn tensor_embedding_order() {
        let half = half_spin();
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(two_spin_embed(&i2, &i2).unwrap(), CMatrix::identity(4, 4));
        let z1 = two_spin_embed(&half.sz, &i2).unwrap();
        let zz = two_spin_embed(&half.sz, &half.sz).unwrap();
        let d1: Vec<f64> = (0..4).map(|k| z1[(k, k)].re).collect();
        let d2: Vec<f64> = (0..4).map(|k| zz[(k, k)].re).collect();
        assert_eq!(d1, vec![0.5, 0.5, -0.5, -0.5]);
        assert_eq!(d2, vec![0.25, -0.25, -0.25, 0.25]);
        let rect = CMatrix::zeros(2, 3);
        assert!(two_spin_embed(&rect, &i2).is_err());
    }
}
