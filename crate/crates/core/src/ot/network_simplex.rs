//! Primal network simplex on the complete bipartite transportation graph.
//!
//! Spanning-tree bookkeeping follows the thread/successor representation
//! (parent, predecessor arc, thread order, subtree sizes) with block-search
//! pivoting. Sources are nodes `0..m`, sinks `m..m+n`, and one artificial
//! root closes the tree. Node potentials `pi` use the convention
//! `reduced(e) = cost(e) + pi[source(e)] - pi[target(e)]`.

use crate::error::{Error, Result};
use crate::measures::{dist_sq, WeightedMeasure};

const NONE: usize = usize::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Optimal coupling in sparse form plus its dual certificate.
#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Source potentials `u` and sink potentials `v` with `c - u - v ≥ 0`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Largest dual infeasibility or complementary-slackness residual.
    pub violation: f64,
    pub pivots: usize,
}

struct Simplex {
    m: usize,
    n: usize,
    arc_num: usize,
    cost: Vec<f64>,
    // Artificial arc endpoints; regular arcs are computed from the index.
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    flow: Vec<f64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    next_arc: usize,
    block_size: usize,
    neg_tol: f64,
}

impl Simplex {
    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.m + e % self.n
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    fn new(cost: Vec<f64>, supply: &[f64], m: usize, n: usize) -> Self {
        let node_num = m + n;
        let arc_num = m * n;
        let root = node_num;
        let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c));
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let total = arc_num + node_num;

        let mut s = Simplex {
            m,
            n,
            arc_num,
            cost,
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            flow: vec![0.0; total],
            state: vec![STATE_LOWER; total],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            neg_tol: 1e-12 * (1.0 + max_cost),
        };
        s.cost.resize(total, 0.0);

        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if supply[u] >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_source[u] = u;
                s.art_target[u] = root;
                s.flow[e] = supply[u];
                s.cost[e] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.art_source[u] = root;
                s.art_target[u] = u;
                s.flow[e] = -supply[u];
                s.cost[e] = art_cost;
            }
        }
        s
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.source(e)] - self.pi[self.target(e)]
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.neg_tol;
        let mut found = NONE;
        let mut cnt = self.block_size;
        let num = self.arc_num;
        let mut e = self.next_arc;
        for _ in 0..num {
            let c = self.state[e] as f64 * self.reduced(e);
            if c < min {
                min = c;
                found = e;
            }
            e += 1;
            if e == num {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    break;
                }
                cnt = self.block_size;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns false when the cycle is unbounded.
    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source(self.in_arc), self.target(self.in_arc))
        } else {
            (self.target(self.in_arc), self.source(self.in_arc))
        };
        self.delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]].max(0.0);
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]].max(0.0);
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        if self.delta > 0.0 {
            let val = self.state[self.in_arc] as f64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[self.in_arc] = STATE_TREE;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                // Subtree sizes shrink along the reversed stem.
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) {
                DIR_UP
            } else {
                DIR_DOWN
            };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self, max_pivots: usize) -> std::result::Result<usize, usize> {
        let mut pivots = 0;
        while self.find_entering_arc() {
            if pivots >= max_pivots {
                return Err(pivots);
            }
            pivots += 1;
            self.find_join_node();
            if !self.find_leaving_arc() {
                // Uncapacitated balanced transport is bounded; treat as stall.
                return Err(pivots);
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
        }
        Ok(pivots)
    }
}

/// Exact quadratic-cost transport between two weighted measures.
///
/// Costs are summed with the given masses, so the result is `W₂²` directly.
pub fn solve_transport(a: &WeightedMeasure, b: &WeightedMeasure) -> Result<SimplexSolution> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (m, n) = (a.len(), b.len());
    let mut cost = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            cost.push(dist_sq(a.point(i), b.point(j)));
        }
    }
    let mut supply: Vec<f64> = a.weights().to_vec();
    supply.extend(b.weights().iter().map(|w| -w));
    // Exact balance keeps the artificial arcs empty at optimality.
    let imbalance: f64 = supply.iter().sum();
    if let Some(k) = (m..m + n).max_by(|&x, &y| supply[y].total_cmp(&supply[x])) {
        supply[k] -= imbalance;
    }

    let mut s = Simplex::new(cost, &supply, m, n);
    let max_pivots = 100 * (m * n) + 100_000;
    let pivots = match s.run(max_pivots) {
        Ok(p) => p,
        Err(p) => {
            return Err(Error::SolverStall {
                iterations: p,
                violation: f64::NAN,
            })
        }
    };

    let u: Vec<f64> = (0..m).map(|i| -s.pi[i]).collect();
    let v: Vec<f64> = (0..n).map(|j| s.pi[m + j]).collect();
    let mut entries = Vec::new();
    let mut total = 0.0;
    let mut violation = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let e = i * n + j;
            let rc = s.cost[e] - u[i] - v[j];
            violation = violation.max(-rc);
            let f = s.flow[e];
            if f > 0.0 {
                violation = violation.max(rc.abs());
                entries.push((i, j, f));
                total += f * s.cost[e];
            }
        }
    }
    // Residual mass on artificial arcs means the tree never became feasible.
    let art_mass: f64 = (0..m + n).map(|k| s.flow[s.arc_num + k].abs()).sum();
    violation = violation.max(art_mass);
    if violation > crate::tolerance::CERTIFICATE_VIOLATION {
        return Err(Error::SolverStall {
            iterations: pivots,
            violation,
        });
    }
    Ok(SimplexSolution {
        entries,
        cost: total.max(0.0),
        u,
        v,
        violation,
        pivots,
    })
}
