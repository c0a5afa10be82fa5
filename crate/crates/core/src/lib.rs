//! Exact optimal transport on particle measures and the sup-convolution
//! envelope of the squared Wasserstein distance to a fixed target.

pub mod differentials;
pub mod envelope;
pub mod error;
pub mod functionals;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod ot;
pub mod tolerance;

pub use differentials::{
    gradient_convergence_experiment, norm_identity_check, w2_gradient, GradientField, Perturbation,
};
pub use envelope::{
    envelope_bruteforce, envelope_value, envelope_with_defaults, equality_sweep,
    equality_threshold, EnvelopeResult,
};
pub use error::{Error, Result};
pub use functionals::{displacement_convexity_check, gaussian_entropy, gaussian_fisher};
pub use measures::{
    push_forward, sample_gaussian, sample_gaussian_stream, second_moment, validate_cloud,
    AffineMap, DiscreteMeasure, EmpiricalCloud, GaussianSpec, WeightedMeasure,
};
pub use ot::{
    gaussian_map, gaussian_w2, map_eigen_range, w2_assignment, w2_bruteforce, w2_general,
    PlanKind, TransportPlan,
};
