//! Per-language distribution statistics: centroid, unbiased covariance, and the
//! trace-scaled ridge that keeps covariances safely positive definite.

use std::path::Path;

use thiserror::Error;

use crate::linalg::{check_symmetric, LinalgError, Matrix};
use crate::scalar::Scalar;
use crate::store::{self, EmbeddingSet, StoreError};

/// Ridge added by [`stats_for`], relative to the mean covariance eigenvalue.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("covariance needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Centroid, covariance and sample count for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageStats<T> {
    language: String,
    mean: Vec<T>,
    covariance: Matrix<T>,
    count: usize,
}

impl<T: Scalar> LanguageStats<T> {
    /// Assembles stats from known parameters; the covariance must be symmetric
    /// and match the mean's dimension, and `count` must be at least 2.
    pub fn from_parts(
        language: impl Into<String>,
        mean: Vec<T>,
        covariance: Matrix<T>,
        count: usize,
    ) -> Result<Self, StatsError> {
        if covariance.rows() != mean.len() {
            return Err(StatsError::DimMismatch(mean.len(), covariance.rows()));
        }
        check_symmetric(&covariance)?;
        if count < 2 {
            return Err(StatsError::InsufficientSamples(count));
        }
        Ok(Self {
            language: language.into(),
            mean,
            covariance,
            count,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn centroid<T: Scalar>(set: &EmbeddingSet<T>) -> Vec<T> {
    let mut acc = vec![T::zero(); set.dim()];
    for row in set.rows() {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = T::from_usize_lossy(set.len());
    acc.into_iter().map(|a| a / n).collect()
}

/// Unbiased sample covariance (divisor N−1), computed on centred rows.
pub fn covariance<T: Scalar>(set: &EmbeddingSet<T>) -> Result<Matrix<T>, StatsError> {
    let n = set.len();
    if n < 2 {
        return Err(StatsError::InsufficientSamples(n));
    }
    let mean = centroid(set);
    covariance_about(set, &mean)
}

fn covariance_about<T: Scalar>(set: &EmbeddingSet<T>, mean: &[T]) -> Result<Matrix<T>, StatsError> {
    let d = set.dim();
    let mut cov = Matrix::zeros(d, d);
    let mut centred = vec![T::zero(); d];
    for row in set.rows() {
        for ((c, &x), &m) in centred.iter_mut().zip(row).zip(mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centred[i];
            if ci == T::zero() {
                continue;
            }
            let out = &mut cov.row_mut(i)[i..];
            for (o, &cj) in out.iter_mut().zip(&centred[i..]) {
                *o += ci * cj;
            }
        }
    }
    let denom = T::from_usize_lossy(set.len() - 1);
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// `cov + ε·I` with `ε = epsilon_scale · trace(cov)/dim`, or `ε = epsilon_scale`
/// when the trace is not positive.
pub fn regularize<T: Scalar>(cov: &Matrix<T>, epsilon_scale: T) -> Matrix<T> {
    let d = cov.rows();
    let trace = cov.trace();
    let eps = if trace > T::zero() {
        epsilon_scale * trace / T::from_usize_lossy(d)
    } else {
        epsilon_scale
    };
    let mut out = cov.clone();
    for i in 0..d {
        out[(i, i)] += eps;
    }
    out
}

pub use crate::linalg::sqrt_psd;

pub fn stats_for<T: Scalar>(set: &EmbeddingSet<T>) -> Result<LanguageStats<T>, StatsError> {
    stats_with_epsilon(set, T::lit(DEFAULT_EPSILON_SCALE))
}

pub fn stats_with_epsilon<T: Scalar>(
    set: &EmbeddingSet<T>,
    epsilon_scale: T,
) -> Result<LanguageStats<T>, StatsError> {
    let n = set.len();
    if n < 2 {
        return Err(StatsError::InsufficientSamples(n));
    }
    let mean = centroid(set);
    let cov = regularize(&covariance_about(set, &mean)?, epsilon_scale);
    Ok(LanguageStats {
        language: set.language().to_string(),
        mean,
        covariance: cov,
        count: n,
    })
}

/// Writes a stats cache: mean as a 1×dim block, covariance as a dim×dim block,
/// then the count as u64 LE. Values are stored as f32.
pub fn save_stats<T: Scalar>(stats: &LanguageStats<T>, path: &Path) -> Result<(), StatsError> {
    let mean = Matrix::from_vec(1, stats.dim(), stats.mean.clone());
    let mut bytes = store::encode_block(&mean);
    bytes.extend(store::encode_block(&stats.covariance));
    bytes.extend_from_slice(&(stats.count as u64).to_le_bytes());
    store::write_bytes(path, &bytes)?;
    Ok(())
}

pub fn load_stats(path: &Path, language: &str) -> Result<LanguageStats<f64>, StatsError> {
    let bytes = store::read_bytes(path)?;
    let (mean, rest) = store::decode_block(&bytes, false)?;
    let (cov, rest) = store::decode_block(rest, false)?;
    if mean.rows() != 1 {
        return Err(StoreError::MalformedHeader(format!("mean block has {} rows", mean.rows())).into());
    }
    if cov.rows() != mean.cols() || cov.cols() != mean.cols() {
        return Err(StatsError::DimMismatch(mean.cols(), cov.rows()));
    }
    let count_bytes: [u8; 8] = rest.try_into().map_err(|_| StoreError::DimensionMismatch {
        expected: 8,
        found: rest.len(),
    })?;
    let count = u64::from_le_bytes(count_bytes) as usize;
    LanguageStats::from_parts(
        language,
        mean.cast::<f64>().into_vec(),
        cov.cast::<f64>(),
        count,
    )
}
