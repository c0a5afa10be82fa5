//! Discrete measures, Gaussian specifications and affine maps.
//!
//! An [`EmpiricalCloud`] is a list of `n` points in `R^d` with implicit
//! uniform weight `1/n`. The same object is read as a random variable on an
//! `n`-atom uniform probability space, atom `i` being mapped to point `i`;
//! the lifted `L²` norm of a configuration is therefore the root mean square
//! over atoms.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tolerance::{SYMMETRY, WEIGHT_SUM};

/// Shared read access to a finitely supported measure.
pub trait DiscreteMeasure {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn point(&self, i: usize) -> &[f64];
    fn weight(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∫ |x|² dμ`.
    fn second_moment(&self) -> f64 {
        (0..self.len())
            .map(|i| self.weight(i) * norm_sq(self.point(i)))
            .sum()
    }

    fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for i in 0..self.len() {
            let w = self.weight(i);
            for (acc, x) in m.iter_mut().zip(self.point(i)) {
                *acc += w * x;
            }
        }
        m
    }
}

/// `∫ |x|² dμ` for either measure type.
pub fn second_moment<M: DiscreteMeasure + ?Sized>(m: &M) -> f64 {
    m.second_moment()
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_rows(raw: &[Vec<f64>]) -> Result<usize> {
    let first = raw.first().ok_or(Error::EmptyInput)?;
    let d = first.len();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    for (row, r) in raw.iter().enumerate() {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row, col });
        }
    }
    Ok(d)
}

/// `n` points in `R^d`, each carrying mass `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCloud {
    points: Vec<f64>,
    n: usize,
    d: usize,
}

/// Validates a raw `n × d` matrix and wraps it as a cloud.
pub fn validate_cloud(raw: &[Vec<f64>]) -> Result<EmpiricalCloud> {
    EmpiricalCloud::from_rows(raw)
}

impl EmpiricalCloud {
    pub fn from_rows(raw: &[Vec<f64>]) -> Result<Self> {
        let d = check_rows(raw)?;
        Ok(Self {
            points: raw.iter().flatten().copied().collect(),
            n: raw.len(),
            d,
        })
    }

    /// Row-major `n × d` buffer.
    pub fn from_flat(points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points.len() % d,
            });
        }
        if let Some(k) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                row: k / d,
                col: k % d,
            });
        }
        let n = points.len() / d;
        Ok(Self { points, n, d })
    }

    /// Convenience constructor for one-dimensional clouds.
    pub fn from_1d(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.points
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.points.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    /// Lifted mean-square distance `(1/n) Σ |xᵢ - yᵢ|²` over the common atom index.
    pub fn lifted_dist_sq(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.n as f64)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Reorders atoms: atom `i` of the result is atom `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut points = Vec::with_capacity(self.points.len());
        for &j in perm {
            points.extend_from_slice(self.point(j));
        }
        Self {
            points,
            n: self.n,
            d: self.d,
        }
    }
}

impl DiscreteMeasure for EmpiricalCloud {
    fn len(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn point(&self, i: usize) -> &[f64] {
        EmpiricalCloud::point(self, i)
    }
    fn weight(&self, _i: usize) -> f64 {
        1.0 / self.n as f64
    }
    fn second_moment(&self) -> f64 {
        norm_sq(&self.points) / self.n as f64
    }
}

/// Points with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
    d: usize,
}

impl WeightedMeasure {
    pub fn new(rows: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let d = check_rows(rows)?;
        if weights.len() != rows.len() {
            return Err(Error::SizeMismatch {
                left: rows.len(),
                right: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "weight {} at row {i} is negative or non-finite",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            points: rows.iter().flatten().copied().collect(),
            weights,
            d,
        })
    }

    /// Uniform weights on the atoms of `cloud`.
    pub fn from_cloud(cloud: &EmpiricalCloud) -> Self {
        let n = cloud.len();
        Self {
            points: cloud.as_flat().to_vec(),
            weights: vec![1.0 / n as f64; n],
            d: cloud.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.points.chunks(self.d).map(|r| r.to_vec()).collect()
    }
}

impl DiscreteMeasure for WeightedMeasure {
    fn len(&self) -> usize {
        self.weights.len()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn point(&self, i: usize) -> &[f64] {
        WeightedMeasure::point(self, i)
    }
    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }
}

/// Mean vector and symmetric positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        if let Some(k) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row: 0, col: k });
        }
        for i in 0..d {
            for j in 0..d {
                if !covariance[(i, j)].is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        if linalg::max_asymmetry(&covariance) > SYMMETRY {
            return Err(Error::InvalidArgument(
                "covariance is not symmetric".to_string(),
            ));
        }
        let (lo, _) = linalg::eigen_range(&covariance);
        if lo <= 0.0 {
            return Err(Error::NonSpd { min_eigenvalue: lo });
        }
        Ok(Self {
            mean,
            covariance: linalg::symmetrize(&covariance),
        })
    }

    /// One-dimensional `N(mean, variance)`.
    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
        )
    }

    /// `N(mean, diag(variances))`.
    pub fn diagonal(mean: &[f64], variances: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

/// `x ↦ matrix · x + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let d = shift.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        if matrix.iter().chain(shift.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row: 0, col: 0 });
        }
        Ok(Self { matrix, shift })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: DMatrix::identity(d, d),
            shift: DVector::zeros(d),
        }
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(matrix, DVector::zeros(d))
    }

    pub fn translation(shift: DVector<f64>) -> Self {
        let d = shift.len();
        Self {
            matrix: DMatrix::zeros(d, d),
            shift,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(x) + &self.shift;
        v.iter().copied().collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            matrix: &self.matrix * &inner.matrix,
            shift: &self.matrix * &inner.shift + &self.shift,
        }
    }
}

/// Draws `n` i.i.d. points from `g` using a ChaCha20 stream keyed by `seed`.
pub fn sample_gaussian(g: &GaussianSpec, n: usize, seed: u64) -> Result<EmpiricalCloud> {
    sample_gaussian_stream(g, n, seed, 0)
}

/// Like [`sample_gaussian`], on an independent stream of the same seed.
pub fn sample_gaussian_stream(
    g: &GaussianSpec,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<EmpiricalCloud> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let d = g.dim();
    let factor = match g.covariance.clone().cholesky() {
        Some(c) => c.l(),
        None => linalg::spd_sqrt(&g.covariance)?,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut points = Vec::with_capacity(n * d);
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        for k in 0..d {
            z[k] = StandardNormal.sample(&mut rng);
        }
        let x = &factor * &z + &g.mean;
        points.extend(x.iter());
    }
    EmpiricalCloud::from_flat(points, d)
}

/// `(Id + h f)_# c`: every point `x` becomes `x + h (A x + b)`.
pub fn push_forward(c: &EmpiricalCloud, f: &AffineMap, h: f64) -> Result<EmpiricalCloud> {
    if f.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            found: f.dim(),
        });
    }
    let mut points = Vec::with_capacity(c.as_flat().len());
    for i in 0..c.len() {
        let x = c.point(i);
        let fx = f.apply(x);
        points.extend(x.iter().zip(&fx).map(|(xi, fi)| xi + h * fi));
    }
    EmpiricalCloud::from_flat(points, c.dim())
}
