//! Exhaustive assignment, used as a test oracle.

use crate::error::{Error, Result};
use crate::measures::{dist_sq, EmpiricalCloud};

/// Largest cloud size accepted by [`w2_bruteforce`].
pub const BRUTEFORCE_MAX: usize = 8;

/// Calls `f` on every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        f(&p);
        // Next permutation in lexicographic order.
        let Some(k) = (1..n).rev().find(|&k| p[k - 1] < p[k]).map(|k| k - 1) else {
            return;
        };
        let l = (k + 1..n).rev().find(|&l| p[k] < p[l]).expect("pivot has a successor");
        p.swap(k, l);
        p[k + 1..].reverse();
    }
}

/// Minimum over all `n!` matchings of `(1/n) Σ |aᵢ - b_{π(i)}|²`.
pub fn w2_bruteforce(a: &EmpiricalCloud, b: &EmpiricalCloud) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.len();
    if n > BRUTEFORCE_MAX {
        return Err(Error::TooLarge {
            size: n,
            max: BRUTEFORCE_MAX,
        });
    }
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| dist_sq(a.point(i), b.point(j)))
        .collect();
    let mut best = f64::INFINITY;
    for_each_permutation(n, |p| {
        let t: f64 = p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        best = best.min(t);
    });
    Ok(best / n as f64)
}
