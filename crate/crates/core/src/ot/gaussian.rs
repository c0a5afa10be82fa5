//! Closed-form transport between Gaussians.

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{AffineMap, GaussianSpec};
use crate::tolerance::MAP_SYMMETRY;

fn same_dim(g1: &GaussianSpec, g2: &GaussianSpec) -> Result<()> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch {
            expected: g1.dim(),
            found: g2.dim(),
        });
    }
    Ok(())
}

/// Bures–Wasserstein `W₂²(N(m1, Σ1), N(m2, Σ2))`.
pub fn gaussian_w2(g1: &GaussianSpec, g2: &GaussianSpec) -> Result<f64> {
    same_dim(g1, g2)?;
    let s1 = linalg::spd_sqrt(g1.covariance())?;
    linalg::spd_sqrt(g2.covariance())?;
    let middle = linalg::spd_sqrt(&(&s1 * g2.covariance() * &s1))?;
    let mean_term = (g1.mean() - g2.mean()).norm_squared();
    let trace = g1.covariance().trace() + g2.covariance().trace() - 2.0 * middle.trace();
    Ok((mean_term + trace).max(0.0))
}

/// Optimal map `x ↦ A(x - m1) + m2` pushing `g1` onto `g2`.
pub fn gaussian_map(g1: &GaussianSpec, g2: &GaussianSpec) -> Result<AffineMap> {
    same_dim(g1, g2)?;
    let s1 = linalg::spd_sqrt(g1.covariance())?;
    let s1_inv = linalg::spd_inv_sqrt(g1.covariance())?;
    linalg::spd_sqrt(g2.covariance())?;
    let middle = linalg::spd_sqrt(&(&s1 * g2.covariance() * &s1))?;
    let a = linalg::symmetrize(&(&s1_inv * middle * &s1_inv));
    let shift = g2.mean() - &a * g1.mean();
    AffineMap::new(a, shift)
}

/// Extreme eigenvalues `(σ⁻, σ⁺)` of the linear part of a monotone affine map.
pub fn map_eigen_range(t: &AffineMap) -> Result<(f64, f64)> {
    let asym = linalg::max_asymmetry(&t.matrix);
    if asym > MAP_SYMMETRY {
        return Err(Error::NonMonotoneMap(format!(
            "linear part is not symmetric (asymmetry {asym:e})"
        )));
    }
    let (lo, hi) = linalg::eigen_range(&t.matrix);
    if lo < -MAP_SYMMETRY {
        return Err(Error::NonMonotoneMap(format!(
            "linear part has negative eigenvalue {lo:e}"
        )));
    }
    Ok((lo.max(0.0), hi))
}
