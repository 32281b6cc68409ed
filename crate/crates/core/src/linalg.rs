//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest condition number accepted for normal-equation solves.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Tolerance on negative eigenvalues when factoring a covariance matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// 2-norm condition estimate of a symmetric matrix from its eigenvalues.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, together
/// with its condition estimate.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let condition = symmetric_condition(m);
    if condition.is_nan() || condition > CONDITION_LIMIT {
        return Err(Error::Numerical { message: "normal matrix is singular or ill-conditioned".into(), condition });
    }
    let chol = Cholesky::new(m.clone())
        .ok_or(Error::Numerical { message: "Cholesky factorization failed".into(), condition })?;
    Ok((chol.inverse(), condition))
}

/// Returns `L` with `L L' = cov` for a symmetric positive semi-definite
/// matrix. Falls back to an eigen factorization (clipping eigenvalues above
/// `-PSD_TOLERANCE` to zero) when Cholesky fails.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::Distribution(format!("covariance is {}x{}, not square", n, cov.ncols())));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Distribution("covariance has non-finite entries".into()));
    }
    let scale = cov.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Distribution(format!("covariance is not symmetric at ({}, {})", i + 1, j + 1)));
            }
        }
    }
    let sym = (cov + cov.transpose()) * 0.5;
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min < -PSD_TOLERANCE {
        return Err(Error::Distribution(format!(
            "covariance is not positive semi-definite (smallest eigenvalue {min:.3e})"
        )));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_covariance() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.5, 0.9, 1.0, 0.75, 0.5, 0.75, 1.0]);
        let l = psd_factor(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).amax() < 1e-12);
    }

    #[test]
    fn factor_accepts_singular_psd() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).amax() < 1e-12);
    }

    #[test]
    fn factor_rejects_indefinite() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(psd_factor(&cov), Err(Error::Distribution(_))));
    }

    #[test]
    fn singular_inverse_reports_condition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match spd_inverse(&m) {
            Err(Error::Numerical { condition, .. }) => assert!(condition > CONDITION_LIMIT),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }
}
