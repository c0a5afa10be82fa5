//! Exact optimal transport for the quadratic cost.
//!
//! Costs are probability-normalized: a permutation plan between `n`-point
//! clouds carries mass `1/n` per pair, so `cost` is `W₂²` itself.

pub mod assignment;
pub mod bruteforce;
pub mod gaussian;
pub mod network_simplex;

use crate::error::Result;
use crate::measures::{dist_sq, DiscreteMeasure, EmpiricalCloud, WeightedMeasure};
use crate::tolerance::ASSIGNMENT_TIE;

pub use assignment::{Assignment, CostMatrix};
pub use bruteforce::{w2_bruteforce, BRUTEFORCE_MAX};
pub use gaussian::{gaussian_map, gaussian_w2, map_eigen_range};

/// Shape of a transport plan.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanKind {
    /// `targets[i]` is the atom of the target cloud receiving atom `i`.
    Permutation(Vec<usize>),
    /// Sparse `(source, target, mass)` triples.
    Coupling(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub kind: PlanKind,
    pub cost: f64,
    /// Largest residual of the dual optimality certificate, in cost units.
    pub certificate_violation: f64,
}

impl TransportPlan {
    pub fn permutation(&self) -> Option<&[usize]> {
        match &self.kind {
            PlanKind::Permutation(p) => Some(p),
            PlanKind::Coupling(_) => None,
        }
    }

    /// `(source, target, mass)` triples for either plan shape.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.kind {
            PlanKind::Permutation(p) => {
                let mass = 1.0 / p.len() as f64;
                p.iter().enumerate().map(|(i, &j)| (i, j, mass)).collect()
            }
            PlanKind::Coupling(c) => c.clone(),
        }
    }

    /// `Σ mass · |xᵢ - yⱼ|²` evaluated from the plan itself.
    pub fn recompute_cost<A, B>(&self, a: &A, b: &B) -> f64
    where
        A: DiscreteMeasure + ?Sized,
        B: DiscreteMeasure + ?Sized,
    {
        self.entries()
            .iter()
            .map(|&(i, j, m)| m * dist_sq(a.point(i), b.point(j)))
            .sum()
    }

    /// Largest deviation of the plan's marginals from the two measures' weights.
    pub fn marginal_error<A, B>(&self, a: &A, b: &B) -> f64
    where
        A: DiscreteMeasure + ?Sized,
        B: DiscreteMeasure + ?Sized,
    {
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for (i, j, m) in self.entries() {
            rows[i] += m;
            cols[j] += m;
        }
        let r = rows
            .iter()
            .enumerate()
            .map(|(i, s)| (s - a.weight(i)).abs());
        let c = cols
            .iter()
            .enumerate()
            .map(|(j, s)| (s - b.weight(j)).abs());
        r.chain(c).fold(0.0, f64::max)
    }
}

/// Sorting permutation of a 1D cloud, or `None` if two points coincide.
fn strict_order(c: &EmpiricalCloud) -> Option<Vec<usize>> {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&i, &j| c.point(i)[0].total_cmp(&c.point(j)[0]));
    if idx.windows(2).any(|w| c.point(w[0])[0] == c.point(w[1])[0]) {
        return None;
    }
    Some(idx)
}

/// Monotone matching of two 1D clouds with distinct points, which is then
/// the unique optimum.
fn monotone_matching(a: &EmpiricalCloud, b: &EmpiricalCloud) -> Option<Vec<usize>> {
    if a.dim() != 1 {
        return None;
    }
    let oa = strict_order(a)?;
    let ob = strict_order(b)?;
    let mut perm = vec![0; a.len()];
    for (&i, &j) in oa.iter().zip(&ob) {
        perm[i] = j;
    }
    Some(perm)
}

fn permutation_cost(a: &EmpiricalCloud, b: &EmpiricalCloud, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(i, &j)| dist_sq(a.point(i), b.point(j)))
        .sum::<f64>()
        / a.len() as f64
}

/// Optimal matching between two equal-size uniform clouds.
///
/// Among matchings whose cost is within `1e-12` of the optimum the
/// lexicographically smallest one is returned.
pub fn w2_assignment(a: &EmpiricalCloud, b: &EmpiricalCloud) -> Result<TransportPlan> {
    a.check_same_shape(b)?;
    if let Some(perm) = monotone_matching(a, b) {
        let cost = permutation_cost(a, b, &perm);
        return Ok(TransportPlan {
            kind: PlanKind::Permutation(perm),
            cost,
            certificate_violation: 0.0,
        });
    }
    let cost = CostMatrix::squared_euclidean(a, b);
    let sol = assignment::solve(&cost, None);
    let perm = assignment::lexicographic_min(&cost, &sol, ASSIGNMENT_TIE);
    let n = a.len() as f64;
    Ok(TransportPlan {
        cost: permutation_cost(a, b, &perm),
        certificate_violation: sol.dual_violation(&cost) / n,
        kind: PlanKind::Permutation(perm),
    })
}

/// Optimal coupling between two weighted measures.
pub fn w2_general(a: &WeightedMeasure, b: &WeightedMeasure) -> Result<TransportPlan> {
    let s = network_simplex::solve_transport(a, b)?;
    Ok(TransportPlan {
        kind: PlanKind::Coupling(s.entries),
        cost: s.cost,
        certificate_violation: s.violation,
    })
}

/// Repeated assignment solves against a fixed target, reusing the column
/// potentials of the previous solve as a warm start.
#[derive(Debug, Clone, Default)]
pub struct WarmAssignment {
    v: Option<Vec<f64>>,
    pub solves: usize,
}

impl WarmAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Optimal permutation and its normalized cost. No tie-breaking.
    pub fn solve(&mut self, a: &EmpiricalCloud, b: &EmpiricalCloud) -> (Vec<usize>, f64) {
        self.solves += 1;
        let perm = match monotone_matching(a, b) {
            Some(p) => p,
            None => {
                let cost = CostMatrix::squared_euclidean(a, b);
                let sol = assignment::solve(&cost, self.v.as_deref());
                self.v = Some(sol.v);
                sol.col_for_row
            }
        };
        let c = permutation_cost(a, b, &perm);
        (perm, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::validate_cloud;

    #[test]
    fn assignment_examples() {
        let a = EmpiricalCloud::from_1d(&[0.0, 1.0]).unwrap();
        let b = EmpiricalCloud::from_1d(&[2.0, 5.0]).unwrap();
        let p = w2_assignment(&a, &b).unwrap();
        assert_eq!(p.cost, 10.0);
        assert_eq!(p.permutation().unwrap(), &[0, 1]);

        let same = w2_assignment(&a, &a).unwrap();
        assert_eq!(same.cost, 0.0);
        assert_eq!(same.permutation().unwrap(), &[0, 1]);

        let x = validate_cloud(&[vec![0.0, 0.0]]).unwrap();
        let y = validate_cloud(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(w2_assignment(&x, &y).unwrap().cost, 25.0);
    }

    #[test]
    fn duplicate_points_use_lexicographic_identity() {
        let a = validate_cloud(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let p = w2_assignment(&a, &a).unwrap();
        assert_eq!(p.cost, 0.0);
        assert_eq!(p.permutation().unwrap(), &[0, 1, 2]);
        let z = EmpiricalCloud::from_1d(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w2_assignment(&z, &z).unwrap().permutation().unwrap(), &[0, 1, 2]);
    }

    #[test]
    fn general_examples() {
        let a = WeightedMeasure::new(&[vec![0.0]], vec![1.0]).unwrap();
        let b = WeightedMeasure::new(&[vec![1.0], vec![-1.0]], vec![0.5, 0.5]).unwrap();
        let p = w2_general(&a, &b).unwrap();
        assert!((p.cost - 1.0).abs() < 1e-12);
        assert!(p.marginal_error(&a, &b) < 1e-12);
        assert!((p.recompute_cost(&a, &b) - p.cost).abs() < 1e-12);
    }

    #[test]
    fn warm_assignment_matches_cold() {
        let a = validate_cloud(&[vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        let b = validate_cloud(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let mut w = WarmAssignment::new();
        let (_, c1) = w.solve(&a, &b);
        let (_, c2) = w.solve(&a, &b);
        let exact = w2_assignment(&a, &b).unwrap().cost;
        assert!((c1 - exact).abs() < 1e-12 && (c2 - exact).abs() < 1e-12);
    }
}
