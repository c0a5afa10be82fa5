#![allow(dead_code)]

use moreau_w2::EmpiricalCloud;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded cloud with coordinates uniform in `[-scale, scale]`.
pub fn random_cloud(n: usize, d: usize, scale: f64, seed: u64) -> EmpiricalCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n * d).map(|_| rng.random_range(-scale..=scale)).collect();
    EmpiricalCloud::from_flat(pts, d).unwrap()
}

pub fn cloud_1d(v: &[f64]) -> EmpiricalCloud {
    EmpiricalCloud::from_1d(v).unwrap()
}

/// Pair of clouds of equal shape with `n ∈ sizes`, `d ∈ 1..=max_d`.
pub fn cloud_pair(
    sizes: std::ops::RangeInclusive<usize>,
    max_d: usize,
) -> impl Strategy<Value = (EmpiricalCloud, EmpiricalCloud)> {
    (sizes, 1..=max_d).prop_flat_map(|(n, d)| {
        let coords = prop::collection::vec(-5.0f64..5.0, n * d);
        (coords.clone(), coords).prop_map(move |(a, b)| {
            (
                EmpiricalCloud::from_flat(a, d).unwrap(),
                EmpiricalCloud::from_flat(b, d).unwrap(),
            )
        })
    })
}
