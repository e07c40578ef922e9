//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// `a^H b`
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

pub fn norm_sqr(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Inverse of a Hermitian positive definite matrix via Cholesky, falling back
/// to LU when the factorization fails.
pub fn hermitian_inverse(r: &CMatrix) -> Result<CMatrix> {
    if let Some(ch) = r.clone().cholesky() {
        return Ok(ch.inverse());
    }
    r.clone().try_inverse().ok_or(Error::NonInvertibleCovariance)
}

/// Solve `R x = b` for Hermitian positive definite `R`.
pub fn hermitian_solve(r: &CMatrix, b: &CVector) -> Result<CVector> {
    if let Some(ch) = r.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    r.clone()
        .lu()
        .solve(b)
        .ok_or(Error::NonInvertibleCovariance)
}

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigenvalues of a general complex square matrix from its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Largest deviation from Hermitian symmetry, `max |M - M^H|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
