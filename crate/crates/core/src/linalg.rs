//! Hermitian matrix helpers on top of nalgebra's eigensolver.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest entrywise deviation |M_ij - conj(M_ji)|.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest entry magnitude, used to turn absolute tolerances into relative ones.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of the hermitian part of `m`, ascending.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Apply a real function to a hermitian matrix through its eigendecomposition.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> Result<f64>) -> Result<CMatrix> {
    let eig = hermitize(m).symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
        let fl = f(lambda)?;
        scaled
            .column_mut(col)
            .scale_mut(fl);
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

/// M^{-1/2} for a hermitian positive definite matrix.
pub fn inverse_sqrt(m: &CMatrix, floor: f64) -> Result<CMatrix> {
    hermitian_function(m, |lambda| {
        if lambda <= floor {
            Err(Error::NotPositive(lambda))
        } else {
            Ok(1.0 / lambda.sqrt())
        }
    })
}

/// Max deviation of U^†U from the identity.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let n = prod.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}
