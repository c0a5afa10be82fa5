//! Wasserstein gradient of `W₂²(·, ν)` on uniform clouds, and the
//! convergence of envelope gradients towards it.
//!
//! At a cloud whose optimal matching `π` is unique the gradient is the
//! field `2(xᵢ - ν_{π(i)})`. Uniqueness is measured by the assignment gap,
//! the normalized cost of the second-best matching minus the optimum.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::envelope::{default_max_iter, envelope_value, EnvelopeResult};
use crate::error::{Error, Result};
use crate::measures::EmpiricalCloud;
use crate::ot::{assignment, w2_assignment, CostMatrix};

/// Gaps below this mark a point where the gradient is not defined.
pub const DEGENERATE_GAP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GradientField {
    pub base: EmpiricalCloud,
    /// `2(xᵢ - T(xᵢ))`, one row per atom.
    pub vectors: DMatrix<f64>,
    /// Second-best minus optimal normalized cost; `+∞` for a single atom.
    pub assignment_gap: f64,
    pub permutation: Vec<usize>,
    pub w2: f64,
}

impl GradientField {
    pub fn is_degenerate(&self) -> bool {
        self.assignment_gap < DEGENERATE_GAP
    }

    /// `(1/n) Σ |vᵢ|²`.
    pub fn mean_square(&self) -> f64 {
        self.vectors.norm_squared() / self.vectors.nrows() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_square().sqrt()
    }

    /// Fails with [`Error::Degenerate`] when the matching is not unique.
    pub fn require_unique(self) -> Result<Self> {
        if self.is_degenerate() {
            Err(Error::Degenerate(self.assignment_gap))
        } else {
            Ok(self)
        }
    }
}

/// Gradient field at `mu` with its assignment gap.
///
/// Degenerate points are returned normally and flagged by
/// [`GradientField::is_degenerate`].
pub fn w2_gradient(mu: &EmpiricalCloud, nu: &EmpiricalCloud) -> Result<GradientField> {
    mu.check_same_shape(nu)?;
    let plan = w2_assignment(mu, nu)?;
    let perm = plan.permutation().expect("assignment plans are permutations").to_vec();
    let (n, d) = (mu.len(), mu.dim());

    let cost = CostMatrix::squared_euclidean(mu, nu);
    let sol = assignment::solve(&cost, None);
    let gap = match assignment::second_best(&cost, &sol) {
        None => f64::INFINITY,
        Some((g, _)) => {
            // A different optimum from the solver means two tied matchings.
            let tied = perm != sol.col_for_row;
            if tied {
                0.0
            } else {
                g / n as f64
            }
        }
    };
    let vectors = DMatrix::from_fn(n, d, |i, k| 2.0 * (mu.point(i)[k] - nu.point(perm[i])[k]));
    Ok(GradientField {
        base: mu.clone(),
        vectors,
        assignment_gap: gap,
        permutation: perm,
        w2: plan.cost,
    })
}

/// `(lhs, rhs, rel_err)` with `lhs = (1/n) Σ |∇ᵢ|²`, `rhs = 4 W₂²`.
pub fn norm_identity_check(mu: &EmpiricalCloud, nu: &EmpiricalCloud) -> Result<(f64, f64, f64)> {
    let field = w2_gradient(mu, nu)?.require_unique()?;
    let lhs = field.mean_square();
    let rhs = 4.0 * field.w2;
    Ok((lhs, rhs, (lhs - rhs).abs() / (1.0 + rhs)))
}

/// How the perturbed clouds `X_δ` are built from `X_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    /// Radius is `scale · δ^power` in the lifted RMS norm.
    pub scale: f64,
    pub power: f64,
    pub seed: u64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            scale: 1.0,
            power: 2.0,
            seed: 0,
        }
    }
}

impl Perturbation {
    pub fn radius(&self, delta: f64) -> f64 {
        self.scale * delta.powf(self.power)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub delta: f64,
    /// Requested radius `scale·δ^power`.
    pub radius: f64,
    /// `‖X_δ - X_0‖` actually used.
    pub perturbation_norm: f64,
    /// `‖(2/δ)(X*_δ - X_δ) - 2(X_0 - T(X_0))‖`.
    pub gradient_error: f64,
    pub envelope_gap: f64,
    /// Tolerance the envelope was run with.
    pub envelope_tol: f64,
    /// `‖∇U_δ(X_δ)‖`.
    pub gradient_norm: f64,
    /// `2 W₂(L(X*_δ), ν)` plus the slack allowed by the envelope gap.
    pub norm_bound: f64,
    pub norm_bound_ok: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `‖∇U(X_0)‖`.
    pub reference_norm: f64,
    pub assignment_gap: f64,
    /// Whether the last row's error is below the requested tolerance.
    pub final_below_tol: bool,
}

fn lifted_rms(a: &DMatrix<f64>) -> f64 {
    (a.norm_squared() / a.nrows() as f64).sqrt()
}

/// `X_0` moved by seeded Gaussian noise of lifted norm at most `radius`,
/// shrunk until the atom-to-atom pairing stays an optimal coupling.
pub fn perturb(x0: &EmpiricalCloud, radius: f64, seed: u64) -> Result<EmpiricalCloud> {
    if radius == 0.0 {
        return Ok(x0.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..x0.as_flat().len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let rms = (noise.iter().map(|z| z * z).sum::<f64>() / x0.len() as f64).sqrt();
    let mut scale = if rms > 0.0 { radius / rms } else { 0.0 };
    let identity: Vec<usize> = (0..x0.len()).collect();
    for _ in 0..60 {
        let moved: Vec<f64> = x0
            .as_flat()
            .iter()
            .zip(&noise)
            .map(|(x, z)| x + scale * z)
            .collect();
        let xd = EmpiricalCloud::from_flat(moved, x0.dim())?;
        let plan = w2_assignment(x0, &xd)?;
        let direct = x0.lifted_dist_sq(&xd)?;
        if plan.permutation() == Some(identity.as_slice()) || direct <= plan.cost {
            return Ok(xd);
        }
        scale *= 0.5;
    }
    Ok(x0.clone())
}

/// Envelope gradients at perturbed clouds compared with the gradient at `X_0`.
///
/// Rows follow the order of `deltas`. `tol` is the target for the last
/// row's error; each envelope uses its default tolerance.
pub fn gradient_convergence_experiment(
    x0: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    deltas: &[f64],
    perturbation: &Perturbation,
    tol: f64,
) -> Result<ConvergenceTable> {
    let field = w2_gradient(x0, nu)?.require_unique()?;
    let rows = deltas
        .iter()
        .map(|&delta| convergence_row(x0, nu, &field, delta, perturbation))
        .collect::<Result<Vec<_>>>()?;
    let final_below_tol = rows.last().is_some_and(|r| r.gradient_error < tol);
    Ok(ConvergenceTable {
        reference_norm: field.rms(),
        assignment_gap: field.assignment_gap,
        rows,
        final_below_tol,
    })
}

/// One row of [`gradient_convergence_experiment`]; rows are independent.
pub fn convergence_row(
    x0: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    field: &GradientField,
    delta: f64,
    perturbation: &Perturbation,
) -> Result<ConvergenceRow> {
    let radius = perturbation.radius(delta);
    let xd = perturb(x0, radius, perturbation.seed)?;
    let w2 = w2_assignment(&xd, nu)?.cost;
    let tol = crate::envelope::default_tol(w2);
    let r: EnvelopeResult = match envelope_value(&xd, nu, delta, tol, default_max_iter(x0.len())) {
        Ok(r) => r,
        Err(Error::NoConvergence(r)) => *r,
        Err(e) => return Err(e),
    };
    let gradient_error = lifted_rms(&(&r.gradient - &field.vectors));
    let gradient_norm = r.gradient_norm();
    let slack =
        (2.0 / delta + 2.0) * (r.gap * delta / (1.0 - delta)).max(0.0).sqrt() + 1e-9;
    let norm_bound = 2.0 * r.plan_at_opt.cost.sqrt() + slack;
    Ok(ConvergenceRow {
        delta,
        radius,
        perturbation_norm: x0.lifted_dist_sq(&xd)?.sqrt(),
        gradient_error,
        envelope_gap: r.gap,
        envelope_tol: tol,
        gradient_norm,
        norm_bound,
        norm_bound_ok: gradient_norm <= norm_bound,
        converged: r.converged,
    })
}
