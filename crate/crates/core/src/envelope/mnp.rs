//! Minimum-norm point over the permutation polytope of the target cloud.
//!
//! Vertices are the arrangements `ν∘π` (row-major `n × d`), the goal is
//! the point of their convex hull nearest to a fixed `target`. The active
//! set ("corral") holds affinely independent vertices with positive
//! convex weights; inner products between vertices are cached in a Gram
//! matrix so an affine minimization costs `O(k³)` instead of `O(k² n d)`.

use nalgebra::{DMatrix, DVector};

use crate::measures::EmpiricalCloud;

/// Convex weights below this are treated as zero.
const POS_EPS: f64 = 1e-12;

fn vertex_dot(nu: &EmpiricalCloud, p: &[usize], q: &[usize]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            nu.point(a)
                .iter()
                .zip(nu.point(b))
                .map(|(x, y)| x * y)
                .sum::<f64>()
        })
        .sum()
}

fn vertex_target_dot(nu: &EmpiricalCloud, p: &[usize], target: &[f64]) -> f64 {
    let d = nu.dim();
    p.iter()
        .enumerate()
        .map(|(i, &a)| {
            nu.point(a)
                .iter()
                .zip(&target[i * d..(i + 1) * d])
                .map(|(x, y)| x * y)
                .sum::<f64>()
        })
        .sum()
}

pub(crate) struct Corral<'a> {
    nu: &'a EmpiricalCloud,
    target: Vec<f64>,
    perms: Vec<Vec<usize>>,
    lambda: Vec<f64>,
    gram: Vec<Vec<f64>>,
    q: Vec<f64>,
}

impl<'a> Corral<'a> {
    pub(crate) fn new(nu: &'a EmpiricalCloud, target: Vec<f64>, first: Vec<usize>) -> Self {
        let k00 = vertex_dot(nu, &first, &first);
        let q0 = vertex_target_dot(nu, &first, &target);
        Self {
            nu,
            target,
            perms: vec![first],
            lambda: vec![1.0],
            gram: vec![vec![k00]],
            q: vec![q0],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.perms.len()
    }

    pub(crate) fn contains(&self, perm: &[usize]) -> bool {
        self.perms.iter().any(|p| p == perm)
    }

    /// `B = Σ λ_k ν∘π_k`, row-major.
    pub(crate) fn barycenter(&self) -> Vec<f64> {
        let d = self.nu.dim();
        let mut b = vec![0.0; self.target.len()];
        for (p, &l) in self.perms.iter().zip(&self.lambda) {
            for (i, &j) in p.iter().enumerate() {
                for (acc, y) in b[i * d..(i + 1) * d].iter_mut().zip(self.nu.point(j)) {
                    *acc += l * y;
                }
            }
        }
        b
    }

    /// `Σ λ_k |ν∘π_k - B|²`.
    pub(crate) fn spread(&self, b: &[f64]) -> f64 {
        let d = self.nu.dim();
        let mut s = 0.0;
        for (p, &l) in self.perms.iter().zip(&self.lambda) {
            let mut part = 0.0;
            for (i, &j) in p.iter().enumerate() {
                for (y, bb) in self.nu.point(j).iter().zip(&b[i * d..(i + 1) * d]) {
                    part += (y - bb) * (y - bb);
                }
            }
            s += l * part;
        }
        s
    }

    /// Adds a vertex and runs Wolfe's minor cycle. Returns false when the
    /// vertex is already active, in which case nothing changes.
    pub(crate) fn insert(&mut self, perm: Vec<usize>) -> bool {
        if self.contains(&perm) {
            return false;
        }
        let row: Vec<f64> = self
            .perms
            .iter()
            .map(|p| vertex_dot(self.nu, p, &perm))
            .collect();
        let kk = vertex_dot(self.nu, &perm, &perm);
        for (r, &v) in self.gram.iter_mut().zip(&row) {
            r.push(v);
        }
        let mut last = row;
        last.push(kk);
        self.gram.push(last);
        self.q.push(vertex_target_dot(self.nu, &perm, &self.target));
        self.perms.push(perm);
        self.lambda.push(0.0);
        self.minor_cycle();
        true
    }

    fn remove(&mut self, k: usize) {
        self.perms.remove(k);
        self.lambda.remove(k);
        self.q.remove(k);
        self.gram.remove(k);
        for r in &mut self.gram {
            r.remove(k);
        }
    }

    /// Affine weights (summing to one) of the point of the active set's
    /// affine hull nearest to the target.
    fn affine_min(&self) -> Vec<f64> {
        let k = self.len();
        if k == 1 {
            return vec![1.0];
        }
        let g = &self.gram;
        let m = k - 1;
        // Coordinates relative to vertex 0: minimize |w_0 + Σ β_a (w_a - w_0)|².
        let gm = DMatrix::from_fn(m, m, |a, b| {
            g[a + 1][b + 1] - g[a + 1][0] - g[0][b + 1] + g[0][0]
        });
        let rhs = DVector::from_fn(m, |a, _| {
            -((g[a + 1][0] - g[0][0]) - (self.q[a + 1] - self.q[0]))
        });
        // Affinely independent vertices make `gm` positive definite; the SVD
        // fallback covers near-dependence where Cholesky would lose accuracy.
        let chol = gm.clone().cholesky().filter(|c| {
            let diag = c.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
            lo > 1e-5 * hi
        });
        let beta = match chol {
            Some(c) => c.solve(&rhs),
            None => {
                let svd = gm.svd(true, true);
                let smax = svd.singular_values.iter().fold(0.0f64, |x, &s| x.max(s));
                svd.solve(&rhs, 1e-12 * smax.max(f64::MIN_POSITIVE))
                    .unwrap_or_else(|_| DVector::zeros(m))
            }
        };
        let mut alpha = Vec::with_capacity(k);
        alpha.push(1.0 - beta.sum());
        alpha.extend(beta.iter());
        alpha
    }

    fn minor_cycle(&mut self) {
        for _ in 0..=self.len() + 1 {
            let alpha = self.affine_min();
            if alpha.iter().all(|&a| a > POS_EPS) {
                self.lambda = alpha;
                return;
            }
            let mut theta = 1.0f64;
            let mut hit = 0;
            for (i, (&a, &l)) in alpha.iter().zip(&self.lambda).enumerate() {
                if a <= POS_EPS {
                    let t = if l - a > 0.0 { l / (l - a) } else { 0.0 };
                    if t < theta {
                        theta = t;
                        hit = i;
                    }
                }
            }
            for (l, &a) in self.lambda.iter_mut().zip(&alpha) {
                *l = ((1.0 - theta) * *l + theta * a).max(0.0);
            }
            self.lambda[hit] = 0.0;
            let mut i = self.len();
            while i > 0 {
                i -= 1;
                if self.lambda[i] <= POS_EPS && self.len() > 1 {
                    self.remove(i);
                }
            }
            let total: f64 = self.lambda.iter().sum();
            if total > 0.0 {
                self.lambda.iter_mut().for_each(|l| *l /= total);
            } else {
                let k = self.len();
                self.lambda = vec![1.0 / k as f64; k];
            }
            if self.len() == 1 {
                self.lambda = vec![1.0];
                return;
            }
        }
    }
}
