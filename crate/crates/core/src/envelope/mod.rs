//! Sup-convolution envelope of `W₂²(·, ν)` on `n`-point configurations.
//!
//! For a cloud `X` and `δ ∈ (0, 1)` the envelope is the maximum of the
//! concave function
//!
//! ```text
//! g(X') = W₂²(X', ν) - (1/δ)·(1/n)·|X - X'|²
//! ```
//!
//! over `n × d` configurations `X'`. Writing `W₂²(X', ν)` as a minimum over
//! matchings and exchanging max and min, the dual problem is a minimum
//! over couplings `P` in the permutation polytope:
//!
//! ```text
//! h(P) = (1/n)·[ |X - B|² / (1-δ) + Σ_k λ_k |ν∘π_k - B|² ],   B = Σ_k λ_k ν∘π_k,
//! ```
//!
//! attained in `X'` at `C_P = (X - δB)/(1-δ)`. Minimizing `h` is the
//! projection of `X/δ` onto the polytope; the ascent on `g` runs on the
//! primal side. `h(P) - g(X')` is a certified optimality gap for every
//! iterate. A single matching `π` gives the one-vertex bound
//! `(1/n)|X - ν∘π|²/(1-δ)`.

mod bruteforce;
mod equality;
mod mnp;

pub use bruteforce::{envelope_bruteforce, GRID_MAX_COORDS};
pub use equality::{equality_row, equality_sweep, equality_threshold, SweepRow};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::{dist_sq, EmpiricalCloud};
use crate::ot::{w2_assignment, TransportPlan, WarmAssignment};
use crate::tolerance::{DELTA_MAX, DELTA_MIN};
use mnp::Corral;

/// Bounds recorded after each major iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Best objective value found so far.
    pub lower: f64,
    /// Dual value `h(P_k)` of the current coupling.
    pub upper: f64,
    /// One-vertex bound of the newest matching.
    pub vertex_bound: f64,
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub value: f64,
    pub maximizer: EmpiricalCloud,
    /// `(2/δ)(X* - X)`, one row per atom.
    pub gradient: DMatrix<f64>,
    pub iterations: usize,
    /// Best dual bound minus `value`, plus a floating-point rounding allowance.
    pub gap: f64,
    pub plan_at_opt: TransportPlan,
    pub converged: bool,
    pub delta: f64,
    pub tol: f64,
    /// `W₂²(μ, ν)` of the input cloud.
    pub w2: f64,
    /// Best dual bound.
    pub upper_bound: f64,
    pub history: Vec<IterationRecord>,
    pub assignment_solves: usize,
}

impl EnvelopeResult {
    /// Lifted root-mean-square norm of the gradient.
    pub fn gradient_norm(&self) -> f64 {
        let n = self.gradient.nrows() as f64;
        (self.gradient.norm_squared() / n).sqrt()
    }
}

pub fn check_delta(delta: f64) -> Result<()> {
    if (DELTA_MIN..=DELTA_MAX).contains(&delta) {
        Ok(())
    } else {
        Err(Error::BadDelta(delta))
    }
}

/// `1e-8·(1 + W₂²)`.
pub fn default_tol(w2: f64) -> f64 {
    1e-8 * (1.0 + w2)
}

/// `10·n + 100`.
pub fn default_max_iter(n: usize) -> usize {
    10 * n + 100
}

fn sq_dist_flat(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b)
}

/// `g(X')` for an explicit configuration.
pub fn envelope_objective(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    x_prime: &EmpiricalCloud,
) -> Result<f64> {
    x.check_same_shape(nu)?;
    x.check_same_shape(x_prime)?;
    let w = w2_assignment(x_prime, nu)?.cost;
    Ok(w - x.lifted_dist_sq(x_prime)? / delta)
}

/// `f_π(X') = (1/n)|X' - ν∘π|² - (1/δ)(1/n)|X - X'|²`, the objective with
/// the matching frozen. Bounds `g` from above everywhere.
pub fn frozen_objective(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    perm: &[usize],
    x_prime: &EmpiricalCloud,
) -> Result<f64> {
    x.check_same_shape(x_prime)?;
    let arranged = nu.permuted(perm);
    Ok(x_prime.lifted_dist_sq(&arranged)? - x.lifted_dist_sq(x_prime)? / delta)
}

/// `max_X' f_π(X') = (1/n)|X - ν∘π|²/(1-δ)`, attained at `(X - δ ν∘π)/(1-δ)`.
pub fn permutation_upper_bound(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    perm: &[usize],
) -> Result<f64> {
    Ok(x.lifted_dist_sq(&nu.permuted(perm))? / (1.0 - delta))
}

/// `(X - δ ν∘π)/(1-δ)`.
pub fn permutation_maximizer(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    perm: &[usize],
) -> EmpiricalCloud {
    let d = x.dim();
    let mut out = Vec::with_capacity(x.as_flat().len());
    for (i, &j) in perm.iter().enumerate() {
        for (a, b) in x.point(i).iter().zip(nu.point(j)) {
            out.push((a - delta * b) / (1.0 - delta));
        }
    }
    EmpiricalCloud::from_flat(out, d).expect("finite combination of finite clouds")
}

struct Evaluator<'a> {
    x: &'a EmpiricalCloud,
    nu: &'a EmpiricalCloud,
    delta: f64,
    warm: WarmAssignment,
}

impl Evaluator<'_> {
    /// Objective value and optimal matching at `xp`.
    fn eval(&mut self, xp: &[f64]) -> (f64, Vec<usize>) {
        let c = EmpiricalCloud::from_flat(xp.to_vec(), self.x.dim()).expect("finite iterate");
        let (perm, w) = self.warm.solve(&c, self.nu);
        let n = self.x.len() as f64;
        (w - sq_dist_flat(self.x.as_flat(), xp) / (n * self.delta), perm)
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Affine part `s·t + c` of `n·f_π(a + t(b - a))`; the quadratic part
/// `|b - a|²(1 - 1/δ) t²` is shared by every matching.
fn segment_piece(
    x: &[f64],
    nu: &EmpiricalCloud,
    delta: f64,
    a: &[f64],
    dir: &[f64],
    perm: &[usize],
) -> (f64, f64) {
    let d = nu.dim();
    let (mut dv, mut dx, mut av, mut ax) = (0.0, 0.0, 0.0, 0.0);
    for (i, &j) in perm.iter().enumerate() {
        for k in 0..d {
            let idx = i * d + k;
            let (ai, di) = (a[idx], dir[idx]);
            let v = ai - nu.point(j)[k];
            let w = ai - x[idx];
            dv += di * v;
            dx += di * w;
            av += v * v;
            ax += w * w;
        }
    }
    (2.0 * dv - 2.0 * dx / delta, av - ax / delta)
}

/// Maximizer on `[0, 1]` of `q t² + min_k (s_k t + c_k)` with `q < 0`.
fn model_max(q: f64, pieces: &[(f64, f64)]) -> (f64, f64) {
    let model = |t: f64| {
        q * t * t
            + pieces
                .iter()
                .map(|&(s, c)| s * t + c)
                .fold(f64::INFINITY, f64::min)
    };
    let mut candidates = vec![0.0, 1.0];
    for (k, &(s, c)) in pieces.iter().enumerate() {
        if q < 0.0 {
            candidates.push((-s / (2.0 * q)).clamp(0.0, 1.0));
        }
        for &(s2, c2) in &pieces[k + 1..] {
            if s != s2 {
                let t = (c2 - c) / (s - s2);
                if (0.0..=1.0).contains(&t) {
                    candidates.push(t);
                }
            }
        }
    }
    candidates
        .into_iter()
        .map(|t| (t, model(t)))
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Exact maximization of the concave `t ↦ g(a + t(b - a))` on `[0, 1]`.
///
/// On the segment `g` is a shared concave quadratic plus the minimum of
/// one affine function per matching. Matchings found by evaluating `g` at
/// the maximizer of the current model are added until the model and `g`
/// agree, which happens after finitely many steps.
fn line_search(
    ev: &mut Evaluator<'_>,
    a: (&[f64], f64, &[usize]),
    b: (&[f64], f64, &[usize]),
) -> (f64, Vec<f64>, Vec<usize>, Vec<Vec<usize>>) {
    let dir: Vec<f64> = b.0.iter().zip(a.0).map(|(y, x)| y - x).collect();
    let q = sq_dist_flat(a.0, b.0) * (1.0 - 1.0 / ev.delta);
    let nf = ev.x.len() as f64;
    let xs = ev.x.as_flat();
    let mut perms: Vec<Vec<usize>> = vec![a.2.to_vec(), b.2.to_vec()];
    let mut pieces: Vec<(f64, f64)> = perms
        .iter()
        .map(|p| segment_piece(xs, ev.nu, ev.delta, a.0, &dir, p))
        .collect();
    let mut best = if b.1 > a.1 {
        (b.1, b.0.to_vec(), b.2.to_vec())
    } else {
        (a.1, a.0.to_vec(), a.2.to_vec())
    };
    for _ in 0..64 {
        let (t, m) = model_max(q, &pieces);
        let point = lerp(a.0, b.0, t);
        let (val, perm) = ev.eval(&point);
        if val > best.0 {
            best = (val, point, perm.clone());
        }
        if m / nf - val <= 1e-13 * (1.0 + val.abs()) || perms.contains(&perm) {
            break;
        }
        pieces.push(segment_piece(xs, ev.nu, ev.delta, a.0, &dir, &perm));
        perms.push(perm);
    }
    (best.0, best.1, best.2, perms.split_off(2))
}

/// Envelope value, maximizer and gradient with a certified gap.
///
/// Stops once the gap is at most `tol`; after `max_iter` major iterations
/// without that, fails with [`Error::NoConvergence`] carrying the best
/// iterate found.
pub fn envelope_value(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EnvelopeResult> {
    check_delta(delta)?;
    x.check_same_shape(nu)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = x.len();
    let nf = n as f64;
    let d = x.dim();
    let mut ev = Evaluator {
        x,
        nu,
        delta,
        warm: WarmAssignment::new(),
    };

    let (w2, perm0) = ev.eval(x.as_flat());
    let mut best_val = w2;
    let mut best_x = x.as_flat().to_vec();
    let mut best_perm = perm0.clone();

    let target: Vec<f64> = x.as_flat().iter().map(|v| v / delta).collect();
    let mut corral = Corral::new(nu, target, perm0);
    let mut best_upper = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter.max(1) {
        let b = corral.barycenter();
        let upper = (sq_dist_flat(x.as_flat(), &b) / (1.0 - delta) + corral.spread(&b)) / nf;
        best_upper = best_upper.min(upper);
        let c_p: Vec<f64> = x
            .as_flat()
            .iter()
            .zip(&b)
            .map(|(xi, bi)| (xi - delta * bi) / (1.0 - delta))
            .collect();

        let (g_c, vertex) = ev.eval(&c_p);
        let mut found = Vec::new();
        if best_upper - g_c.max(best_val) > tol {
            let (val, point, perm, seen) =
                line_search(&mut ev, (&best_x, best_val, &best_perm), (&c_p, g_c, &vertex));
            found = seen;
            if val > best_val {
                best_val = val;
                best_x = point;
                best_perm = perm;
            }
        } else if g_c > best_val {
            best_val = g_c;
            best_x = c_p;
            best_perm = vertex.clone();
        }
        let arranged = nu.permuted(&vertex);
        let vertex_bound = x.lifted_dist_sq(&arranged)? / (1.0 - delta);
        history.push(IterationRecord {
            lower: best_val,
            upper,
            vertex_bound,
        });
        if best_upper - best_val <= tol {
            converged = true;
            break;
        }
        if !corral.insert(vertex) {
            // The current coupling is already optimal up to rounding.
            break;
        }
        for p in found {
            corral.insert(p);
        }
    }

    let maximizer = EmpiricalCloud::from_flat(best_x, d).expect("finite iterate");
    let plan_at_opt = w2_assignment(&maximizer, nu)?;
    let value = plan_at_opt.cost - x.lifted_dist_sq(&maximizer)? / delta;
    let gradient = DMatrix::from_fn(n, d, |i, k| {
        (2.0 / delta) * (maximizer.point(i)[k] - x.point(i)[k])
    });
    let result = EnvelopeResult {
        value,
        // Both bounds carry rounding error of a few ulps of their magnitude.
        gap: (best_upper - value).max(0.0)
            + 16.0 * f64::EPSILON * (1.0 + value.abs() + best_upper.abs()),
        maximizer,
        gradient,
        iterations: history.len(),
        plan_at_opt,
        converged,
        delta,
        tol,
        w2,
        upper_bound: best_upper,
        history,
        assignment_solves: ev.warm.solves,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NoConvergence(Box::new(result)))
    }
}

/// [`envelope_value`] with the default tolerance and iteration cap.
pub fn envelope_with_defaults(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
) -> Result<EnvelopeResult> {
    x.check_same_shape(nu)?;
    let w2 = w2_assignment(x, nu)?.cost;
    envelope_value(x, nu, delta, default_tol(w2), default_max_iter(x.len()))
}

/// One row of a sandwich check `W₂² - gap ≤ Φ_δ ≤ W₂²/(1-δ) + gap`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub delta: f64,
    pub w2: f64,
    pub value: f64,
    pub upper: f64,
    pub gap: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub converged: bool,
}

/// Runs the envelope at one `δ` and checks both sandwich inequalities.
/// Non-converged runs are reported with their partial gap.
pub fn bounds_row(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> Result<BoundsRow> {
    let w2 = w2_assignment(x, nu)?.cost;
    let tol = tol.unwrap_or_else(|| default_tol(w2));
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(x.len()));
    let r = match envelope_value(x, nu, delta, tol, max_iter) {
        Ok(r) => r,
        Err(Error::NoConvergence(r)) => *r,
        Err(e) => return Err(e),
    };
    let upper = w2 / (1.0 - delta);
    Ok(BoundsRow {
        delta,
        w2,
        value: r.value,
        upper,
        gap: r.gap,
        lower_ok: r.value >= w2 - r.gap,
        upper_ok: r.value <= upper + r.gap,
        converged: r.converged,
    })
}
