//! Entropy, Fisher information and displacement convexity for Gaussians.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{AffineMap, GaussianSpec};

/// Second differences above this count as nonnegative.
pub const CONVEXITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalReport {
    pub entropy: f64,
    pub fisher: f64,
}

/// `∫ μ log μ = -½ log((2πe)^d det Σ)`.
pub fn gaussian_entropy(g: &GaussianSpec) -> Result<f64> {
    let d = g.dim() as f64;
    let log_det = linalg::spd_log_det(g.covariance())?;
    Ok(-0.5 * (d * (2.0 * PI * E).ln() + log_det))
}

/// `∫ |∇ log μ|² dμ = tr Σ⁻¹`.
pub fn gaussian_fisher(g: &GaussianSpec) -> Result<f64> {
    Ok(linalg::spd_inverse(g.covariance())?.trace())
}

pub fn functional_report(g: &GaussianSpec) -> Result<FunctionalReport> {
    Ok(FunctionalReport {
        entropy: gaussian_entropy(g)?,
        fisher: gaussian_fisher(g)?,
    })
}

/// `n` points evenly spaced on `[-h_max, h_max]`.
pub fn symmetric_grid(h_max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| -h_max + 2.0 * h_max * k as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityTable {
    /// `(h, E((Id + h f)_# μ))`.
    pub rows: Vec<(f64, f64)>,
    /// Divided second differences at interior grid points.
    pub second_differences: Vec<f64>,
    pub convex: bool,
}

/// Entropy along `h ↦ (Id + h f)_# μ` and whether it is convex on the grid.
///
/// Requires `|h|·‖A‖ < 1/2` for every grid value. The grid is sorted
/// before evaluation.
pub fn displacement_convexity_check(
    g: &GaussianSpec,
    f: &AffineMap,
    h_grid: &[f64],
) -> Result<ConvexityTable> {
    let d = g.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: f.dim(),
        });
    }
    let op = linalg::operator_norm(&f.matrix);
    let mut hs: Vec<f64> = h_grid.to_vec();
    if let Some(&h) = hs.iter().find(|h| !h.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid value {h} is not finite")));
    }
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    for &h in &hs {
        if h.abs() * op >= 0.5 {
            return Err(Error::GridOutOfBand {
                h,
                operator_norm: op,
            });
        }
    }
    let id = nalgebra::DMatrix::<f64>::identity(d, d);
    let mut rows = Vec::with_capacity(hs.len());
    for &h in &hs {
        let m = &id + &f.matrix * h;
        let cov = &m * g.covariance() * m.transpose();
        let mean = &m * g.mean() + &f.shift * h;
        let pushed = GaussianSpec::new(mean, linalg::symmetrize(&cov))?;
        rows.push((h, gaussian_entropy(&pushed)?));
    }
    let second_differences: Vec<f64> = rows
        .windows(3)
        .map(|w| {
            let (h0, e0) = w[0];
            let (h1, e1) = w[1];
            let (h2, e2) = w[2];
            let left = (e1 - e0) / (h1 - h0);
            let right = (e2 - e1) / (h2 - h1);
            2.0 * (right - left) / (h2 - h0)
        })
        .collect();
    let convex = second_differences.iter().all(|&s| s >= -CONVEXITY_TOL);
    Ok(ConvexityTable {
        rows,
        second_differences,
        convex,
    })
}
