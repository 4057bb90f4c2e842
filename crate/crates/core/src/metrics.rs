//! Centroid cosine similarity and Fréchet distance between embedding
//! distributions, with matched-count subsampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, SymmetricEigen};
use crate::report::Metric;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::stats::{centroid, sqrt_psd, stats_for, LanguageStats, StatsError};
use crate::store::{EmbeddingSet, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Argument {
    First,
    Second,
}

impl std::fmt::Display for Argument {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Argument::First => "first",
            Argument::Second => "second",
        })
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("cosine similarity of a zero vector ({0} argument)")]
    ZeroVector(Argument),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("FID came out at {value:e}, below the round-off allowance -{tolerance:e}")]
    NumericalFailure { value: f64, tolerance: f64 },
    #[error("subsample size {n} outside [2, {available}]")]
    NOutOfRange { n: usize, available: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<crate::linalg::LinalgError> for MetricError {
    fn from(e: crate::linalg::LinalgError) -> Self {
        MetricError::Stats(e.into())
    }
}

/// One query-vs-target value with the sample counts that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub query: String,
    pub target: String,
    pub metric: Metric,
    pub value: f64,
    pub sample_count_query: usize,
    pub sample_count_target: usize,
    /// Present iff one side was subsampled.
    pub seed: Option<u64>,
}

/// `(a·b)/(‖a‖‖b‖)`, clamped to [−1, 1].
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimMismatch(a.len(), b.len()));
    }
    let norm_a = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let norm_b = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if !(norm_a > T::zero()) {
        return Err(MetricError::ZeroVector(Argument::First));
    }
    if !(norm_b > T::zero()) {
        return Err(MetricError::ZeroVector(Argument::Second));
    }
    // Normalising first keeps the products in range for huge or tiny inputs.
    let dot: T = a.iter().zip(b).map(|(&x, &y)| (x / norm_a) * (y / norm_b)).sum();
    Ok(dot.max(-T::one()).min(T::one()))
}

/// Trace of `(Σ_q Σ_t)^{1/2}`, via the similar symmetric product `S Σ_t S`
/// with `S = Σ_q^{1/2}`.
pub fn trace_sqrt_product<T: Scalar>(cov_q: &Matrix<T>, cov_t: &Matrix<T>) -> Result<T, MetricError> {
    let s = sqrt_psd(cov_q)?;
    let mut m = s.matmul(cov_t)?.matmul(&s)?;
    m.symmetrize();
    let eig = SymmetricEigen::new(&m)?;
    Ok(eig.values.iter().map(|&l| l.max(T::zero()).sqrt()).sum())
}

/// Fréchet distance between the Gaussians fitted to two languages:
/// `‖μ_q−μ_t‖² + Tr(Σ_q + Σ_t − 2(Σ_qΣ_t)^{1/2})`.
///
/// Results in `[−1e-6·max(1, TrΣ_q+TrΣ_t), 0)` are round-off and clamp to 0;
/// anything more negative is reported.
pub fn fid<T: Scalar>(q: &LanguageStats<T>, t: &LanguageStats<T>) -> Result<T, MetricError> {
    if q.dim() != t.dim() {
        return Err(MetricError::DimMismatch(q.dim(), t.dim()));
    }
    let mean_term: T = q
        .mean()
        .iter()
        .zip(t.mean())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let tr_q = q.covariance().trace();
    let tr_t = t.covariance().trace();
    let cross = trace_sqrt_product(q.covariance(), t.covariance())?;
    let value = mean_term + tr_q + tr_t - T::lit(2.0) * cross;
    let tolerance = T::lit(1e-6) * T::one().max(tr_q + tr_t);
    if value >= T::zero() {
        Ok(value)
    } else if value >= -tolerance {
        Ok(T::zero())
    } else {
        Err(MetricError::NumericalFailure {
            value: value.to_f64_lossy(),
            tolerance: tolerance.to_f64_lossy(),
        })
    }
}

/// `n` rows drawn without replacement, kept in their original order.
pub fn matched_subsample<T: Scalar>(
    set: &EmbeddingSet<T>,
    n: usize,
    seed: u64,
) -> Result<EmbeddingSet<T>, MetricError> {
    if n < 2 || n > set.len() {
        return Err(MetricError::NOutOfRange {
            n,
            available: set.len(),
        });
    }
    let mut idx = SeededRng::new(seed).choose_indices(set.len(), n);
    idx.sort_unstable();
    Ok(set.select_rows(&idx)?)
}

/// FID after reducing the larger set to the smaller one's size.
pub fn fid_matched<T: Scalar>(
    query: &EmbeddingSet<T>,
    target: &EmbeddingSet<T>,
    seed: u64,
) -> Result<SimilarityScore, MetricError> {
    for s in [query, target] {
        if s.len() < 2 {
            return Err(StatsError::InsufficientSamples(s.len()).into());
        }
    }
    if query.dim() != target.dim() {
        return Err(MetricError::DimMismatch(query.dim(), target.dim()));
    }
    let n = query.len().min(target.len());
    let (q_stats, t_stats, used_seed) = match query.len().cmp(&target.len()) {
        std::cmp::Ordering::Equal => (stats_for(query)?, stats_for(target)?, None),
        std::cmp::Ordering::Greater => (
            stats_for(&matched_subsample(query, n, seed)?)?,
            stats_for(target)?,
            Some(seed),
        ),
        std::cmp::Ordering::Less => (
            stats_for(query)?,
            stats_for(&matched_subsample(target, n, seed)?)?,
            Some(seed),
        ),
    };
    let value = fid(&q_stats, &t_stats)?;
    Ok(SimilarityScore {
        query: query.language().to_string(),
        target: target.language().to_string(),
        metric: Metric::Fid,
        value: value.to_f64_lossy(),
        sample_count_query: n,
        sample_count_target: n,
        seed: used_seed,
    })
}

/// Cosine between the empirical centroids of two sets.
pub fn cosine_between_sets<T: Scalar>(
    query: &EmbeddingSet<T>,
    target: &EmbeddingSet<T>,
) -> Result<SimilarityScore, MetricError> {
    let value = cosine_similarity(&centroid(query), &centroid(target))?;
    Ok(SimilarityScore {
        query: query.language().to_string(),
        target: target.language().to_string(),
        metric: Metric::Cosine,
        value: value.to_f64_lossy(),
        sample_count_query: query.len(),
        sample_count_target: target.len(),
        seed: None,
    })
}

/// Cosine between the query centroid and an externally supplied centroid
/// (for instance one pre-stored by a classifier).
pub fn cosine_against_vector<T: Scalar>(
    query: &EmbeddingSet<T>,
    target_language: &str,
    target_centroid: &[T],
) -> Result<SimilarityScore, MetricError> {
    let value = cosine_similarity(&centroid(query), target_centroid)?;
    Ok(SimilarityScore {
        query: query.language().to_string(),
        target: target_language.to_string(),
        metric: Metric::Cosine,
        value: value.to_f64_lossy(),
        sample_count_query: query.len(),
        sample_count_target: 1,
        seed: None,
    })
}

/// Scores the query against every target in parallel; output order follows
/// `targets` and does not depend on the thread count.
pub fn score_targets<T: Scalar>(
    query: &EmbeddingSet<T>,
    targets: &[EmbeddingSet<T>],
    metric: Metric,
    seed: u64,
) -> Result<Vec<SimilarityScore>, MetricError> {
    targets
        .par_iter()
        .map(|t| match metric {
            Metric::Fid => fid_matched(query, t, seed),
            _ => cosine_between_sets(query, t),
        })
        .collect()
}
