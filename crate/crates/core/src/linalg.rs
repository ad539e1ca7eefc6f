//! Small dense complex-matrix helpers.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::{CMatrix, CVector};

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |H - H†|`.
pub fn hermiticity_residue(h: &CMatrix) -> f64 {
    max_abs(&(h - h.adjoint()))
}

/// `max |U†U - I|`.
pub fn unitarity_residue(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// `exp(-i H t)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    if is_diagonal(h) {
        return CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::from_polar(1.0, -h[(i, i)].re * t)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
    }
    // symmetrize to strip round-off anti-Hermitian noise
    let herm = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let v = eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let herm = (h + h.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j && m[(i, j)] != Complex64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Diagonal unitary `exp(-i diag(angles))`.
pub fn phase_diag(angles: &[f64]) -> CMatrix {
    let n = angles.len();
    CMatrix::from_fn(
        n,
        n,
        |i, j| {
            if i == j {
                Complex64::from_polar(1.0, -angles[i])
            } else {
                Complex64::new(0.0, 0.0)
            }
        },
    )
}

/// `|<a|b>|`.
pub fn overlap(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm()
}

/// Top-left `k x k` block.
pub fn top_block(m: &CMatrix, k: usize) -> CMatrix {
    m.view((0, 0), (k, k)).into_owned()
}

/// Rows/columns of `m` picked by `indices`.
pub fn sub_matrix(m: &CMatrix, indices: &[usize]) -> CMatrix {
    let k = indices.len();
    CMatrix::from_fn(k, k, |i, j| m[(indices[i], indices[j])])
}
