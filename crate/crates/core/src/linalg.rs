//! Small dense complex linear-algebra helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest qubit count for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn check_capacity(qubits: usize) -> Result<()> {
    if qubits > MAX_DENSE_QUBITS {
        return Err(Error::Capacity {
            qubits,
            limit: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Max-entry deviation of `m` from its conjugate transpose.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// |Tr(A†B)| / dim, equal to one iff A and B agree up to a global phase
/// (for unitaries).
pub fn phase_insensitive_overlap(a: &CMatrix, b: &CMatrix) -> f64 {
    let dim = a.nrows() as f64;
    (a.adjoint() * b).trace().norm() / dim
}

/// Entrywise comparison after removing the relative global phase.
pub fn equal_up_to_phase(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    let overlap = (a.adjoint() * b).trace();
    if overlap.norm() < 1e-300 {
        return max_abs(a) <= tol && max_abs(b) <= tol;
    }
    let phase = overlap / overlap.norm();
    max_abs(&(a.map(|z| z * phase) - b)) <= tol
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    let n = m.nrows();
    max_abs(&(m * m.adjoint() - CMatrix::identity(n, n))) <= tol
}

/// exp(-i H t) for Hermitian `h`, via eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let dev = hermitian_deviation(h);
    if dev > 1e-9 {
        return Err(Error::NotHermitian(dev));
    }
    let sym = (h + h.adjoint()).map(|z| z * 0.5);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| C64::from_polar(1.0, -l * t));
    let mut scaled = v.clone();
    for (j, p) in phases.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= *p;
        }
    }
    Ok(scaled * v.adjoint())
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)[0]
}

pub fn pauli_matrix(label: char) -> CMatrix {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match label {
        'X' => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        'Y' => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        'Z' => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        _ => CMatrix::identity(2, 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_z() {
        let z = pauli_matrix('Z');
        let u = expm_hermitian(&z, 0.3).unwrap();
        assert!((u[(0, 0)] - C64::from_polar(1.0, -0.3)).norm() < 1e-14);
        assert!((u[(1, 1)] - C64::from_polar(1.0, 0.3)).norm() < 1e-14);
    }

    #[test]
    fn phase_equality() {
        let x = pauli_matrix('X');
        let y = x.map(|z| z * c(0.0, 1.0));
        assert!(equal_up_to_phase(&x, &y, 1e-12));
        assert!(!equal_up_to_phase(&x, &pauli_matrix('Z'), 1e-6));
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(expm_hermitian(&m, 1.0), Err(Error::NotHermitian(_))));
    }
}
