//! Dense linear assignment by shortest augmenting paths.
//!
//! The solver keeps dual potentials `u` (rows) and `v` (columns) with
//! `c[i][j] - u[i] - v[j] ≥ 0` and equality on matched edges, so any
//! returned matching comes with an optimality certificate. Column
//! potentials from a previous, nearby problem can seed the next solve;
//! only rows whose warm-started edge is not tight get re-augmented.

use crate::measures::{dist_sq, EmpiricalCloud};

/// Row-major `n × n` cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// `c[i][j] = |a_i - b_j|²`.
    pub fn squared_euclidean(a: &EmpiricalCloud, b: &EmpiricalCloud) -> Self {
        Self::from_fn(a.len(), |i, j| dist_sq(a.point(i), b.point(j)))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Optimal matching with its dual potentials.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// `col_for_row[i]` is the column matched to row `i`.
    pub col_for_row: Vec<usize>,
    /// Sum of matched costs (not normalized).
    pub total: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Assignment {
    pub fn reduced_cost(&self, cost: &CostMatrix, i: usize, j: usize) -> f64 {
        cost.get(i, j) - self.u[i] - self.v[j]
    }

    /// Largest violation of dual feasibility or complementary slackness.
    pub fn dual_violation(&self, cost: &CostMatrix) -> f64 {
        let n = cost.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let r = self.reduced_cost(cost, i, j);
                worst = worst.max(-r);
            }
            worst = worst.max(self.reduced_cost(cost, i, self.col_for_row[i]).abs());
        }
        worst
    }
}

const FREE: usize = usize::MAX;

/// Minimum-cost perfect matching.
///
/// `warm_v`, when given, must have length `n`; it only affects running
/// time, never optimality.
pub fn solve(cost: &CostMatrix, warm_v: Option<&[f64]>) -> Assignment {
    let n = cost.size();
    let mut v = match warm_v {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![0.0; n],
    };
    let mut u = vec![0.0; n];
    let mut col_for_row = vec![FREE; n];
    let mut row_for_col = vec![FREE; n];

    for i in 0..n {
        let row = cost.row(i);
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (j, (&c, &vj)) in row.iter().zip(&v).enumerate() {
            let r = c - vj;
            if r < best {
                best = r;
                arg = j;
            }
        }
        u[i] = best;
        if row_for_col[arg] == FREE {
            row_for_col[arg] = i;
            col_for_row[i] = arg;
        }
    }

    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![FREE; n];
    let mut seen_row = vec![false; n];
    let mut seen_col = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        if col_for_row[start] != FREE {
            continue;
        }
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);
        seen_row.iter_mut().for_each(|s| *s = false);
        seen_col.iter_mut().for_each(|s| *s = false);
        remaining.clear();
        remaining.extend((0..n).rev());

        let mut min_val = 0.0;
        let mut i = start;
        let sink = loop {
            seen_row[i] = true;
            let row = cost.row(i);
            let ui = u[i];
            let mut index = FREE;
            let mut lowest = f64::INFINITY;
            for (it, &j) in remaining.iter().enumerate() {
                let r = min_val + row[j] - ui - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row_for_col[j] == FREE) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            let j = remaining.swap_remove(index);
            seen_col[j] = true;
            if row_for_col[j] == FREE {
                break j;
            }
            i = row_for_col[j];
        };

        u[start] += min_val;
        for r in 0..n {
            if seen_row[r] && r != start {
                u[r] += min_val - shortest[col_for_row[r]];
            }
        }
        for c in 0..n {
            if seen_col[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row_for_col[j] = r;
            std::mem::swap(&mut col_for_row[r], &mut j);
            if r == start {
                break;
            }
        }
    }

    let total = (0..n).map(|i| cost.get(i, col_for_row[i])).sum();
    Assignment {
        col_for_row,
        total,
        u,
        v,
    }
}

/// Threshold under which two matchings count as tied, in summed-cost units.
fn tie_threshold(cost: &CostMatrix, tie_normalized: f64) -> f64 {
    let n = cost.size() as f64;
    tie_normalized * n + 64.0 * f64::EPSILON * cost.max_abs() * n
}

/// Dijkstra over the row exchange graph, where edge `r → k` means row `r`
/// takes the column currently held by row `k`, weighted by its reduced cost.
/// Returns distances and predecessors from `source`.
fn exchange_dijkstra(
    n: usize,
    source: usize,
    weight: impl Fn(usize, usize) -> Option<f64>,
    allowed: impl Fn(usize) -> bool,
    stop_at: Option<usize>,
    cutoff: f64,
) -> (Vec<f64>, Vec<usize>) {
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![FREE; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    loop {
        let mut best = f64::INFINITY;
        let mut r = FREE;
        for k in 0..n {
            if !done[k] && dist[k] < best {
                best = dist[k];
                r = k;
            }
        }
        if r == FREE || best > cutoff {
            break;
        }
        done[r] = true;
        if Some(r) == stop_at {
            break;
        }
        if r != source && Some(r) != stop_at && !allowed(r) {
            continue;
        }
        for k in 0..n {
            if done[k] || k == r {
                continue;
            }
            if let Some(w) = weight(r, k) {
                let cand = best + w;
                if cand < dist[k] {
                    dist[k] = cand;
                    pred[k] = r;
                }
            }
        }
    }
    (dist, pred)
}

/// Rewrites an optimal assignment into the lexicographically smallest
/// matching whose cost is within `tie_normalized · n` of the optimum.
///
/// Works on the subgraph of near-tight edges: a tied matching can only use
/// edges whose reduced cost is below the tie threshold.
pub fn lexicographic_min(cost: &CostMatrix, sol: &Assignment, tie_normalized: f64) -> Vec<usize> {
    let n = cost.size();
    let tau = tie_threshold(cost, tie_normalized);
    let rc = |i: usize, j: usize| sol.reduced_cost(cost, i, j).max(0.0);

    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| rc(i, j) <= tau).collect())
        .collect();
    let mut col = sol.col_for_row.clone();
    if tight.iter().all(|t| t.len() <= 1) {
        return col;
    }
    let mut row_of = vec![0usize; n];
    for (i, &j) in col.iter().enumerate() {
        row_of[j] = i;
    }
    let mut fixed = vec![false; n];
    let mut excess: f64 = (0..n).map(|i| rc(i, col[i])).sum();

    for i in 0..n {
        let current = col[i];
        for &j in tight[i].iter().take_while(|&&j| j < current) {
            let first = row_of[j];
            if fixed[first] {
                continue;
            }
            let col_snapshot = &col;
            let weight = |r: usize, k: usize| {
                let w = rc(r, col_snapshot[k]);
                (w <= tau).then_some(w)
            };
            let allowed = |r: usize| !fixed[r] && r != i;
            let (dist, pred) = exchange_dijkstra(n, first, weight, allowed, Some(i), tau);
            if !dist[i].is_finite() {
                continue;
            }
            // Rows along first → … → i; each takes the column of its successor,
            // and i takes j.
            let mut chain = vec![i];
            let mut k = i;
            while k != first {
                k = pred[k];
                chain.push(k);
            }
            chain.reverse();
            let mut new_col = col.clone();
            for w in chain.windows(2) {
                new_col[w[0]] = col[w[1]];
            }
            new_col[i] = j;
            let removed: f64 = chain.iter().map(|&r| rc(r, col[r])).sum();
            let added: f64 = chain.iter().map(|&r| rc(r, new_col[r])).sum();
            let candidate = excess - removed + added;
            if candidate <= tau {
                excess = candidate;
                col = new_col;
                for &r in &chain {
                    row_of[col[r]] = r;
                }
                break;
            }
        }
        fixed[i] = true;
    }
    col
}

/// Cost of the cheapest matching different from `sol` minus the optimum,
/// in summed-cost units, together with that matching. `None` when `n < 2`.
///
/// The runner-up differs from the optimum by a single exchange cycle, so it
/// is found as the minimum-weight cycle of the reduced-cost exchange graph.
pub fn second_best(cost: &CostMatrix, sol: &Assignment) -> Option<(f64, Vec<usize>)> {
    let n = cost.size();
    if n < 2 {
        return None;
    }
    let col = &sol.col_for_row;
    let w = |r: usize, k: usize| sol.reduced_cost(cost, r, col[k]).max(0.0);
    let mut best = f64::INFINITY;
    let mut best_cycle: Vec<usize> = Vec::new();
    for s in 0..n {
        let (dist, pred) =
            exchange_dijkstra(n, s, |r, k| Some(w(r, k)), |_| true, None, best);
        for k in 0..n {
            if k == s || !dist[k].is_finite() {
                continue;
            }
            let cand = dist[k] + w(k, s);
            if cand < best {
                best = cand;
                let mut cycle = vec![k];
                let mut r = k;
                while r != s {
                    r = pred[r];
                    cycle.push(r);
                }
                cycle.reverse();
                best_cycle = cycle;
            }
        }
    }
    // Row cycle s → … → k → s: each row takes its successor's column.
    let mut alt = col.clone();
    for t in 0..best_cycle.len() {
        let r = best_cycle[t];
        let next = best_cycle[(t + 1) % best_cycle.len()];
        alt[r] = col[next];
    }
    let alt_total: f64 = (0..n).map(|i| cost.get(i, alt[i])).sum();
    let gap = (alt_total - sol.total).max(0.0);
    Some((gap, alt))
}

/// Sum of matched costs for an explicit permutation.
pub fn permutation_total(cost: &CostMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
}
