use crate::error::{Error, Result};
use crate::scalar::Real;
use faer::{Mat, Side};
use num_complex::Complex;

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn eigh<T: Real>(h: &Mat<Complex<T>>) -> Result<(Vec<T>, Mat<Complex<T>>)> {
    let e = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigvalsh<T: Real>(h: &Mat<Complex<T>>) -> Result<Vec<T>> {
    h.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::SolverFailure(format!("{e:?}")))
}

/// Real symmetric eigendecomposition.
pub fn eigh_real<T: Real>(h: &Mat<T>) -> Result<(Vec<T>, Mat<T>)> {
    let e = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..h.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// max |H - H^dagger|
pub fn hermiticity_residual<T: Real>(h: &Mat<Complex<T>>) -> T {
    let mut r = T::zero();
    for i in 0..h.nrows() {
        for j in 0..=i {
            r = r.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn column<T: Real>(u: &Mat<Complex<T>>, j: usize) -> Vec<Complex<T>> {
    (0..u.nrows()).map(|i| u[(i, j)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_hermitian() {
        let h = Mat::<Complex<f64>>::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => Complex::new(1.0, 0.0),
            (1, 1) => Complex::new(-1.0, 0.0),
            (0, 1) => Complex::new(0.0, -1.0),
            _ => Complex::new(0.0, 1.0),
        });
        let (v, u) = eigh(&h).unwrap();
        let s2 = 2f64.sqrt();
        assert!((v[0] + s2).abs() < 1e-14 && (v[1] - s2).abs() < 1e-14);
        let x = column(&u, 1);
        let hx0 = h[(0, 0)] * x[0] + h[(0, 1)] * x[1];
        assert!((hx0 - x[0] * s2).norm() < 1e-13);
        assert_eq!(hermiticity_residual(&h), 0.0);
        let w = eigvalsh(&h.clone()).unwrap();
        assert!((w[1] - s2).abs() < 1e-14);
    }
}
