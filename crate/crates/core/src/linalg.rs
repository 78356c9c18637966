//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a symmetric matrix counts as singular.
pub const SINGULAR_RATIO: f64 = 1e-10;

/// Inverse symmetric square root `M^{-1/2}` of a symmetric positive definite matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = SINGULAR_RATIO * max;
    for &ev in eig.eigenvalues.iter() {
        if !(ev > threshold) {
            return Err(Error::Singular {
                eigenvalue: ev,
                threshold,
            });
        }
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Symmetric square root of a positive semidefinite matrix; tiny negative
/// eigenvalues from rounding are clipped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Checks the eigenvalue floor and returns `(min, max)` eigenvalues.
pub fn check_nonsingular(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = SINGULAR_RATIO * max.abs();
    if !(min > threshold) || max <= 0.0 {
        return Err(Error::Singular {
            eigenvalue: min,
            threshold,
        });
    }
    Ok((min, max))
}

/// Solves `m x = rhs` for symmetric positive definite `m`, after the eigenvalue check.
pub fn spd_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    check_nonsingular(m)?;
    let chol = m.clone().cholesky().ok_or(Error::Singular {
        eigenvalue: 0.0,
        threshold: 0.0,
    })?;
    Ok(chol.solve(rhs))
}

/// Column means of an `n x k` matrix.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Covariance of the rows of `x` with divisor `n - 1`.
pub fn row_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let means = column_means(x);
    let mut centred = x.clone();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let denom = (n as f64 - 1.0).max(1.0);
    centred.transpose() * &centred / denom
}

/// Cross covariance of the rows of `x` (n x a) and `y` (n x b), divisor `n - 1`.
pub fn row_cross_covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mx = column_means(x);
    let my = column_means(y);
    let mut cx = x.clone();
    for (j, mut col) in cx.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mx[j]);
    }
    let mut cy = y.clone();
    for (j, mut col) in cy.column_iter_mut().enumerate() {
        col.add_scalar_mut(-my[j]);
    }
    let denom = (n as f64 - 1.0).max(1.0);
    cx.transpose() * cy / denom
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_inv_sqrt(&m).unwrap();
        let back = &r * &m * &r;
        assert!(max_abs_diff(&back, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match sym_inv_sqrt(&m) {
            Err(Error::Singular { eigenvalue, .. }) => assert!(eigenvalue.abs() < 1e-12),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn covariance_divisor() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        assert_eq!(row_covariance(&x)[(0, 0)], 2.0);
    }
}
