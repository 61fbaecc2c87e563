//! Thin helpers over faer's dense decompositions.

use faer::{c64, Mat, MatRef, Side};

use crate::{Error, Result};

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))
}

/// Eigenvalues (ascending) of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
    let values = evd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigen-decomposition with eigenvalues in decreasing order and each
/// eigenvector's first non-negligible entry rotated to be positive real.
pub fn hermitian_eigen_desc(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let (mut values, u) = hermitian_eigen(m)?;
    let p = values.len();
    values.reverse();
    let mut out = Mat::from_fn(u.nrows(), p, |i, j| u[(i, p - 1 - j)]);
    fix_phases(&mut out);
    Ok((values, out))
}

/// Rotates each column so its first entry above `1e-12` in modulus is real positive.
pub fn fix_phases(u: &mut Mat<c64>) {
    for j in 0..u.ncols() {
        let Some(pivot) = (0..u.nrows()).map(|i| u[(i, j)]).find(|x| x.norm() > 1e-12) else {
            continue;
        };
        let phase = pivot.conj() / pivot.norm();
        for i in 0..u.nrows() {
            u[(i, j)] *= phase;
        }
    }
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}
