//! Process-wide default tolerances.
//!
//! Operations that state their own tolerance use it verbatim; everything else
//! falls back to [`default_abs`], which starts at `1e-9` and can be changed
//! with [`set_default_abs`].

use std::sync::atomic::{AtomicU64, Ordering};

/// Initial absolute tolerance.
pub const DEFAULT_ABS: f64 = 1e-9;

/// Weights of a discrete measure must sum to one within this bound.
pub const WEIGHT_SUM: f64 = 1e-12;

/// Covariance matrices must be symmetric within this bound.
pub const SYMMETRY: f64 = 1e-12;

/// Eigenvalues below this floor make a matrix count as not positive definite.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Monotone maps are symmetrized when the asymmetry is below this bound.
pub const MAP_SYMMETRY: f64 = 1e-10;

/// Two assignment costs within this (normalized) distance are ties.
pub const ASSIGNMENT_TIE: f64 = 1e-12;

/// Largest complementary-slackness violation accepted from the network simplex.
pub const CERTIFICATE_VIOLATION: f64 = 1e-7;

/// Smallest and largest admissible sup-convolution parameters.
pub const DELTA_MIN: f64 = 1e-6;
pub const DELTA_MAX: f64 = 1.0 - 1e-6;

static GLOBAL_ABS: AtomicU64 = AtomicU64::new(0x3E11_2E0B_E826_D695); // 1e-9

/// Current default absolute tolerance.
pub fn default_abs() -> f64 {
    f64::from_bits(GLOBAL_ABS.load(Ordering::Relaxed))
}

/// Override the default absolute tolerance for the whole process.
///
/// Non-positive or non-finite values are ignored.
pub fn set_default_abs(tol: f64) {
    if tol.is_finite() && tol > 0.0 {
        GLOBAL_ABS.store(tol.to_bits(), Ordering::Relaxed);
    }
}
