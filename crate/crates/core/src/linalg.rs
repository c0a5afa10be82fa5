//! Small dense symmetric linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tolerance::EIGEN_FLOOR;

/// Largest absolute entry of `m - mᵀ`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition of the symmetric part of `m`, eigenvalues ascending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Extreme eigenvalues of the symmetric part of `m`.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let (values, _) = sorted_eigen(m);
    (values[0], values[values.len() - 1])
}

/// Applies `f` to the spectrum of a symmetric positive definite matrix.
///
/// Fails with [`Error::NonSpd`] when the smallest eigenvalue is below the
/// floor.
pub fn spd_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sorted_eigen(m);
    if values[0] < EIGEN_FLOOR {
        return Err(Error::NonSpd {
            min_eigenvalue: values[0],
        });
    }
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (col, &lambda) in values.iter().enumerate() {
        let s = f(lambda);
        for row in 0..n {
            scaled[(row, col)] *= s;
        }
    }
    Ok(symmetrize(&(scaled * vectors.transpose())))
}

pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_apply(m, f64::sqrt)
}

pub fn spd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_apply(m, |x| 1.0 / x.sqrt())
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_apply(m, |x| 1.0 / x)
}

/// Sum of log-eigenvalues; fails like [`spd_apply`].
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let (values, _) = sorted_eigen(m);
    if values[0] < EIGEN_FLOOR {
        return Err(Error::NonSpd {
            min_eigenvalue: values[0],
        });
    }
    Ok(values.iter().map(|v| v.ln()).sum())
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}
