//! Regime where the envelope equals `W₂²/(1-δ)`, tested on sampled Gaussians.

use crate::error::{Error, Result};
use crate::measures::{sample_gaussian_stream, EmpiricalCloud, GaussianSpec};
use crate::ot::{gaussian_map, gaussian_w2, map_eigen_range, w2_assignment};

use super::{default_max_iter, default_tol, envelope_value};

/// `max(σ⁻(T'), 1/σ⁺(T))` for the optimal maps `T: μ → ν` and `T': ν → μ`.
///
/// For Gaussians `T' = T⁻¹`, so both terms coincide; a disagreement beyond
/// `1e-8` is reported as [`Error::Inconsistent`].
pub fn equality_threshold(g_mu: &GaussianSpec, g_nu: &GaussianSpec) -> Result<f64> {
    let t = gaussian_map(g_mu, g_nu)?;
    let t_back = gaussian_map(g_nu, g_mu)?;
    let (_, sigma_plus) = map_eigen_range(&t)?;
    let (sigma_minus_back, _) = map_eigen_range(&t_back)?;
    let a = sigma_minus_back;
    let b = 1.0 / sigma_plus;
    if (a - b).abs() > 1e-8 * (1.0 + a.abs().max(b.abs())) {
        return Err(Error::Inconsistent(format!(
            "threshold terms disagree: {a} vs {b}"
        )));
    }
    Ok(a.max(b))
}

/// One `δ` of an equality sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub threshold: f64,
    pub envelope_value: f64,
    /// `W₂²(μ_n, ν_n)/(1-δ)` on the sampled clouds.
    pub predicted: f64,
    /// Particle `W₂²(μ_n, ν_n)`.
    pub w2: f64,
    /// Closed-form `W₂²(μ, ν)`, for judging the sampling error.
    pub gaussian_w2: f64,
    /// `|value - predicted| / predicted`, or `|value|` when `predicted = 0`.
    pub relative_deviation: f64,
    pub gap: f64,
    pub converged: bool,
}

/// Envelope on fixed clouds at one `δ`, compared with the equality prediction.
///
/// A run that hits the iteration cap still yields a row, flagged unconverged.
pub fn equality_row(
    mu: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    tol: Option<f64>,
    threshold: f64,
    gaussian_w2: f64,
) -> Result<SweepRow> {
    let w2 = w2_assignment(mu, nu)?.cost;
    let tol = tol.unwrap_or_else(|| default_tol(w2));
    let r = match envelope_value(mu, nu, delta, tol, default_max_iter(mu.len())) {
        Ok(r) => r,
        Err(Error::NoConvergence(r)) => *r,
        Err(e) => return Err(e),
    };
    let predicted = w2 / (1.0 - delta);
    let relative_deviation = if predicted > 0.0 {
        (r.value - predicted).abs() / predicted
    } else {
        r.value.abs()
    };
    Ok(SweepRow {
        delta,
        threshold,
        envelope_value: r.value,
        predicted,
        w2,
        gaussian_w2,
        relative_deviation,
        gap: r.gap,
        converged: r.converged,
    })
}

/// Samples `n` atoms from each Gaussian with the same `seed` and evaluates
/// [`equality_row`] for every `δ`, in the given order.
///
/// Both clouds are drawn from one stream of standard normals, so atom `i`
/// of `ν_n` is the image of atom `i` of `μ_n` under the affine map between
/// the two Cholesky factorizations. Equal specs therefore give equal clouds.
pub fn equality_sweep(
    g_mu: &GaussianSpec,
    g_nu: &GaussianSpec,
    n: usize,
    seed: u64,
    deltas: &[f64],
    tol: Option<f64>,
) -> Result<Vec<SweepRow>> {
    let threshold = equality_threshold(g_mu, g_nu)?;
    let exact = gaussian_w2(g_mu, g_nu)?;
    let mu = sample_gaussian_stream(g_mu, n, seed, 0)?;
    let nu = sample_gaussian_stream(g_nu, n, seed, 0)?;
    deltas
        .iter()
        .map(|&delta| equality_row(&mu, &nu, delta, tol, threshold, exact))
        .collect()
}
