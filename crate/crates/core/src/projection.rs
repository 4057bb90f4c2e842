//! Exact t-SNE for 2-D visualisation of pooled embedding sets.
//!
//! High-dimensional affinities are Gaussian with a per-point bandwidth chosen by
//! bisection to hit the target perplexity; low-dimensional affinities use a
//! Student-t kernel with one degree of freedom. The layout is optimised by plain
//! gradient descent with momentum (no adaptive gains), O(N²) per iteration.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::store::EmbeddingSet;

pub const MIN_POINTS: usize = 10;
pub const MIN_ITERATIONS: usize = 250;
/// Row entropies must land within this distance of `ln(perplexity)`.
pub const ENTROPY_TOLERANCE: f64 = 1e-5;
pub const MAX_BISECTION_STEPS: usize = 50;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("t-SNE needs at least {min} points, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("perplexity {perplexity} out of range; must be in (0, {max})")]
    PerplexityOutOfRange { perplexity: f64, max: f64 },
    #[error("at least {MIN_ITERATIONS} iterations are required, got {0}")]
    TooFewIterations(usize),
    #[error("bandwidth search did not reach the target perplexity for point {point}")]
    BandwidthSearchFailure { point: usize },
    #[error("embedding sets disagree on dimension: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    /// Exaggeration and the first momentum value apply before this iteration.
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    /// (before, after) `exaggeration_iterations`.
    pub momentum: (f64, f64),
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            momentum: (0.5, 0.8),
            seed: 0,
        }
    }
}

impl ProjectionConfig {
    /// Largest admissible perplexity (exclusive) for `n` points.
    pub fn max_perplexity(n: usize) -> f64 {
        (n as f64 - 1.0) / 3.0
    }

    pub fn validate(&self, n_points: usize) -> Result<(), ProjectionError> {
        if n_points < MIN_POINTS {
            return Err(ProjectionError::TooFewPoints {
                n: n_points,
                min: MIN_POINTS,
            });
        }
        let max = Self::max_perplexity(n_points);
        if !(self.perplexity > 0.0 && self.perplexity < max) {
            return Err(ProjectionError::PerplexityOutOfRange {
                perplexity: self.perplexity,
                max,
            });
        }
        if self.iterations < MIN_ITERATIONS {
            return Err(ProjectionError::TooFewIterations(self.iterations));
        }
        if !(self.learning_rate > 0.0) || !(self.early_exaggeration >= 1.0) {
            return Err(ProjectionError::InvalidConfig(
                "learning_rate must be > 0 and early_exaggeration ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D<T> {
    /// N×2.
    pub points: Matrix<T>,
    pub labels: Vec<String>,
    /// KL(P‖Q) at the random starting layout.
    pub initial_kl: f64,
    pub final_kl: f64,
    pub config: ProjectionConfig,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ProjectionConfig,
    seed: u64,
    points: usize,
    initial_kl: f64,
    final_kl: f64,
}

impl<T: Scalar> Projection2D<T> {
    /// `language,x,y` per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language,x,y\n");
        for (label, p) in self.labels.iter().zip(self.points.iter_rows()) {
            let _ = writeln!(out, "{},{},{}", label, p[0].to_f64_lossy(), p[1].to_f64_lossy());
        }
        out
    }

    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::to_value(Sidecar {
            config: &self.config,
            seed: self.config.seed,
            points: self.labels.len(),
            initial_kl: self.initial_kl,
            final_kl: self.final_kl,
        })
        .expect("sidecar serializes")
    }
}

pub fn squared_distances<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let n = x.rows();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            (0..n)
                .map(|j| {
                    if i == j {
                        T::zero()
                    } else {
                        xi.iter().zip(x.row(j)).map(|(&a, &b)| (a - b) * (a - b)).sum()
                    }
                })
                .collect()
        })
        .collect();
    Matrix::from_vec(n, n, rows.into_iter().flatten().collect())
}

/// Entropy (nats) and normalised weights of one row at precision `beta`.
/// `dist` excludes the point itself.
fn row_entropy<T: Scalar>(dist: &[T], d_min: T, beta: T, out: &mut [T]) -> T {
    let mut sum = T::zero();
    let mut weighted = T::zero();
    for (o, &d) in out.iter_mut().zip(dist) {
        let shifted = d - d_min;
        let w = (-beta * shifted).exp();
        *o = w;
        sum += w;
        weighted += w * shifted;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Conditional affinities `p_{j|i}` for one row, bandwidth found by bisection.
fn conditional_row<T: Scalar>(dist_row: &[T], i: usize, perplexity: f64) -> Result<Vec<T>, ProjectionError> {
    let others: Vec<T> = dist_row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .collect();
    let target = T::lit(perplexity.ln());
    let tol = T::lit(ENTROPY_TOLERANCE);
    let d_min = others.iter().fold(T::infinity(), |m, &d| m.min(d));
    let nonzero: Vec<T> = others.iter().copied().filter(|&d| d > T::zero()).collect();
    let mut beta = if nonzero.is_empty() {
        T::one()
    } else {
        T::from_usize_lossy(nonzero.len()) / nonzero.into_iter().sum::<T>()
    };
    let two = T::lit(2.0);
    let mut lo = T::zero();
    let mut hi: Option<T> = None;
    let mut probs = vec![T::zero(); others.len()];
    for _ in 0..MAX_BISECTION_STEPS {
        let h = row_entropy(&others, d_min, beta, &mut probs);
        let diff = h - target;
        if diff.abs() <= tol {
            let mut full = Vec::with_capacity(dist_row.len());
            full.extend_from_slice(&probs[..i]);
            full.push(T::zero());
            full.extend_from_slice(&probs[i..]);
            return Ok(full);
        }
        if diff > T::zero() {
            // too flat: sharpen
            lo = beta;
            beta = match hi {
                Some(h) => (beta + h) / two,
                None => beta * two,
            };
        } else {
            hi = Some(beta);
            beta = (beta + lo) / two;
        }
    }
    Err(ProjectionError::BandwidthSearchFailure { point: i })
}

/// Symmetrised affinity matrix `P = (P_cond + P_condᵀ)/(2N)`: zero diagonal,
/// entries summing to 1.
pub fn pairwise_affinities<T: Scalar>(vectors: &Matrix<T>, perplexity: f64) -> Result<Matrix<T>, ProjectionError> {
    let n = vectors.rows();
    if n < 4 {
        return Err(ProjectionError::TooFewPoints { n, min: 4 });
    }
    let max = n as f64 - 1.0;
    if !(perplexity > 0.0 && perplexity < max) {
        return Err(ProjectionError::PerplexityOutOfRange { perplexity, max });
    }
    let dist = squared_distances(vectors);
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| conditional_row(dist.row(i), i, perplexity))
        .collect::<Result<_, _>>()?;
    let scale = T::from_usize_lossy(2 * n);
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (rows[i][j] + rows[j][i]) / scale;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    Ok(p)
}

/// Student-t kernel values `1/(1+‖y_i−y_j‖²)` (zero diagonal) and their sum.
fn student_kernel<T: Scalar>(y: &Matrix<T>) -> (Matrix<T>, T) {
    let n = y.rows();
    let mut num = Matrix::zeros(n, n);
    let mut z = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[(i, 0)] - y[(j, 0)];
            let dy = y[(i, 1)] - y[(j, 1)];
            let v = T::one() / (T::one() + dx * dx + dy * dy);
            num[(i, j)] = v;
            num[(j, i)] = v;
            z += v + v;
        }
    }
    (num, z)
}

/// KL(P‖Q) for layout `y` (N×2).
pub fn kl_divergence<T: Scalar>(p: &Matrix<T>, y: &Matrix<T>) -> T {
    let (num, z) = student_kernel(y);
    let floor = T::min_positive_value();
    let mut kl = T::zero();
    for (&pij, &nij) in p.as_slice().iter().zip(num.as_slice()) {
        if pij > T::zero() {
            let q = (nij / z).max(floor);
            kl += pij * (pij / q).ln();
        }
    }
    kl
}

/// Gradient of KL(exaggeration·P ‖ Q) with respect to every coordinate of `y`:
/// `4 Σ_j (p_ij − q_ij)(y_i − y_j)/(1 + ‖y_i − y_j‖²)`.
pub fn kl_gradient<T: Scalar>(p: &Matrix<T>, y: &Matrix<T>, exaggeration: T) -> Matrix<T> {
    let n = y.rows();
    let (num, z) = student_kernel(y);
    let four = T::lit(4.0);
    let mut grad = Matrix::zeros(n, 2);
    for i in 0..n {
        let (mut gx, mut gy) = (T::zero(), T::zero());
        for j in 0..n {
            if i == j {
                continue;
            }
            let nij = num[(i, j)];
            let mult = (exaggeration * p[(i, j)] - nij / z) * nij;
            gx += mult * (y[(i, 0)] - y[(j, 0)]);
            gy += mult * (y[(i, 1)] - y[(j, 1)]);
        }
        grad[(i, 0)] = four * gx;
        grad[(i, 1)] = four * gy;
    }
    grad
}

fn stack<T: Scalar>(pooled: &[EmbeddingSet<T>]) -> Result<(Matrix<T>, Vec<String>), ProjectionError> {
    let dim = pooled.first().map_or(0, EmbeddingSet::dim);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for set in pooled {
        if set.dim() != dim {
            return Err(ProjectionError::DimMismatch(dim, set.dim()));
        }
        for row in set.rows() {
            data.extend_from_slice(row);
            labels.push(set.language().to_string());
        }
    }
    Ok((Matrix::from_vec(labels.len(), dim, data), labels))
}

pub fn tsne<T: Scalar>(pooled: &[EmbeddingSet<T>], config: &ProjectionConfig) -> Result<Projection2D<T>, ProjectionError> {
    let (x, labels) = stack(pooled)?;
    let n = x.rows();
    config.validate(n)?;
    let p = pairwise_affinities(&x, config.perplexity)?;

    let mut rng = SeededRng::new(config.seed);
    let init = T::lit(INIT_STD);
    let mut y = Matrix::from_vec(n, 2, (0..2 * n).map(|_| T::lit(rng.standard_normal()) * init).collect());
    let initial_kl = kl_divergence(&p, &y).to_f64_lossy();

    let lr = T::lit(config.learning_rate);
    let mut velocity = Matrix::<T>::zeros(n, 2);
    for iter in 0..config.iterations {
        let early = iter < config.exaggeration_iterations;
        let exaggeration = T::lit(if early { config.early_exaggeration } else { 1.0 });
        let momentum = T::lit(if early { config.momentum.0 } else { config.momentum.1 });
        let grad = kl_gradient(&p, &y, exaggeration);
        for ((v, &g), yv) in velocity
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(y.as_mut_slice().iter_mut())
        {
            *v = momentum * *v - lr * g;
            *yv += *v;
        }
        recenter(&mut y);
    }
    let final_kl = kl_divergence(&p, &y).to_f64_lossy();
    Ok(Projection2D {
        points: y,
        labels,
        initial_kl,
        final_kl,
        config: config.clone(),
    })
}

fn recenter<T: Scalar>(y: &mut Matrix<T>) {
    let n = T::from_usize_lossy(y.rows());
    for c in 0..2 {
        let mean = (0..y.rows()).map(|i| y[(i, c)]).sum::<T>() / n;
        for i in 0..y.rows() {
            y[(i, c)] -= mean;
        }
    }
}
