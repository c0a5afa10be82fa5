//! Exact maximum of the envelope objective over a Cartesian grid.
//!
//! The grid has one axis per coordinate `(i, k)`, centred at `x_{ik}`.
//! Best-first branch and bound over boxes of grid indices: for a fixed
//! matching the objective is a sum of one-dimensional concave quadratics
//! `q(t) = (t - y)² - (t - x)²/δ`, so its maximum over a box is separable,
//! and the minimum over matchings of those maxima bounds `g` on the box.
//! On a single grid point the bound equals `g` there, so the first
//! singleton popped is the grid maximum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::measures::EmpiricalCloud;
use crate::ot::bruteforce::for_each_permutation;

use super::check_delta;

/// Largest `n·d` accepted.
pub const GRID_MAX_COORDS: usize = 4;

struct Node {
    bound: f64,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

struct Problem {
    /// Per coordinate: centre `x` and, per matching, target coordinate `y`.
    centre: Vec<f64>,
    targets: Vec<Vec<f64>>,
    step: f64,
    inv_delta: f64,
    n: f64,
}

impl Problem {
    fn q(&self, c: usize, y: f64, m: i64) -> f64 {
        let t = self.centre[c] + m as f64 * self.step;
        (t - y) * (t - y) - self.inv_delta * self.step * self.step * (m * m) as f64
    }

    /// Max of `q` over grid indices `lo..=hi`.
    fn axis_max(&self, c: usize, y: f64, lo: i64, hi: i64) -> f64 {
        // Continuous maximizer of (t-y)² - (t-x)²/δ, as a grid offset.
        let x = self.centre[c];
        let t_star = (self.inv_delta * x - y) / (self.inv_delta - 1.0);
        let m_star = (t_star - x) / self.step;
        let below = (m_star.floor() as i64).clamp(lo, hi);
        let above = (m_star.ceil() as i64).clamp(lo, hi);
        self.q(c, y, below).max(self.q(c, y, above))
    }

    fn bound(&self, lo: &[i64], hi: &[i64]) -> f64 {
        self.targets
            .iter()
            .map(|ys| {
                ys.iter()
                    .enumerate()
                    .map(|(c, &y)| self.axis_max(c, y, lo[c], hi[c]))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            / self.n
    }
}

/// Maximum of `g` over the grid `x + step·ℤ^{nd}` within `halfwidth` of `x`
/// in every coordinate.
///
/// The grid must contain every one-matching maximizer `(X - δ ν∘π)/(1-δ)`,
/// so that the true maximizer lies inside the grid's bounding box.
pub fn envelope_bruteforce(
    x: &EmpiricalCloud,
    nu: &EmpiricalCloud,
    delta: f64,
    grid_halfwidth: f64,
    grid_step: f64,
) -> Result<f64> {
    check_delta(delta)?;
    x.check_same_shape(nu)?;
    let (n, d) = (x.len(), x.dim());
    if n * d > GRID_MAX_COORDS {
        return Err(Error::TooLarge {
            size: n * d,
            max: GRID_MAX_COORDS,
        });
    }
    if !(grid_step > 0.0 && grid_step.is_finite() && grid_halfwidth >= 0.0) {
        return Err(Error::InvalidGrid(format!(
            "step {grid_step} and halfwidth {grid_halfwidth} must be positive"
        )));
    }
    let half = (grid_halfwidth / grid_step).floor() as i64;
    let mut targets = Vec::new();
    let mut uncovered = None;
    for_each_permutation(n, |p| {
        let mut ys = Vec::with_capacity(n * d);
        for (i, &j) in p.iter().enumerate() {
            for k in 0..d {
                let (xc, yc) = (x.point(i)[k], nu.point(j)[k]);
                let c = (xc - delta * yc) / (1.0 - delta);
                if (c - xc).abs() > grid_halfwidth {
                    uncovered = Some(c);
                }
                ys.push(yc);
            }
        }
        targets.push(ys);
    });
    if let Some(c) = uncovered {
        return Err(Error::InvalidGrid(format!(
            "candidate coordinate {c} lies outside the grid"
        )));
    }
    let problem = Problem {
        centre: x.as_flat().to_vec(),
        targets,
        step: grid_step,
        inv_delta: 1.0 / delta,
        n: n as f64,
    };

    let dims = n * d;
    let mut heap = BinaryHeap::new();
    let lo = vec![-half; dims];
    let hi = vec![half; dims];
    heap.push(Node {
        bound: problem.bound(&lo, &hi),
        lo,
        hi,
    });
    while let Some(node) = heap.pop() {
        let widest = (0..dims)
            .max_by_key(|&c| node.hi[c] - node.lo[c])
            .expect("at least one coordinate");
        if node.hi[widest] == node.lo[widest] {
            return Ok(node.bound);
        }
        let mid = node.lo[widest] + (node.hi[widest] - node.lo[widest]) / 2;
        let mut left_hi = node.hi.clone();
        left_hi[widest] = mid;
        let mut right_lo = node.lo.clone();
        right_lo[widest] = mid + 1;
        heap.push(Node {
            bound: problem.bound(&node.lo, &left_hi),
            lo: node.lo.clone(),
            hi: left_hi,
        });
        heap.push(Node {
            bound: problem.bound(&right_lo, &node.hi),
            lo: right_lo,
            hi: node.hi,
        });
    }
    unreachable!("the heap always holds the box containing the best point")
}
