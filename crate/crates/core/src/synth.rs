//! Synthetic embedding catalogs drawn from parameterised Gaussians, with
//! closed-form FID ground truth.
//!
//! Rows are `mean + F·z` where `F` is the symmetric square root of the spec
//! covariance and `z` is a vector of Box–Muller standard normals from a ChaCha8
//! stream. Each cluster in a catalog gets its own stream, seeded with
//! `derive_seed(seed, cluster_index)`. Outlier rows are picked from a second
//! stream, so changing the outlier settings never changes the underlying normals.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{sqrt_psd, LinalgError, Matrix, SymmetricEigen};
use crate::metrics::{fid, MetricError};
use crate::rng::{derive_seed, SeededRng};
use crate::scalar::Scalar;
use crate::stats::LanguageStats;
use crate::store::{save_embeddings, save_manifest, EmbeddingSet, LanguageManifest, ManifestEntry, StoreError};

pub const CATALOG_MANIFEST: &str = "manifest.tsv";
/// Stream index reserved for outlier selection.
const OUTLIER_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cluster spec {language:?}: {reason}")]
    InvalidSpec { language: String, reason: String },
    #[error("covariance for {language:?} is not PSD (min eigenvalue {min_eigenvalue:e})")]
    NonPsdCovariance { language: String, min_eigenvalue: f64 },
    #[error("analytic FID requires outlier-free specs; {0:?} has outliers")]
    OutliersPresent(String),
    #[error("duplicate language code {0:?} in cluster specs")]
    DuplicateLanguage(String),
    #[error("cluster spec list is empty")]
    NoSpecs,
    #[error("cluster spec JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Full matrix or diagonal shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceSpec {
    Full(Vec<Vec<f64>>),
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub language: String,
    pub mean: Vec<f64>,
    /// Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceSpec>,
    pub count: usize,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default = "one")]
    pub outlier_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ClusterSpec {
    /// Isotropic cluster with covariance `variance·I` and no outliers.
    pub fn isotropic(language: impl Into<String>, mean: Vec<f64>, variance: f64, count: usize) -> Self {
        let d = mean.len();
        Self {
            language: language.into(),
            mean,
            covariance: Some(CovarianceSpec::Diagonal(vec![variance; d])),
            count,
            outlier_fraction: 0.0,
            outlier_scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn invalid(&self, reason: impl Into<String>) -> SynthError {
        SynthError::InvalidSpec {
            language: self.language.clone(),
            reason: reason.into(),
        }
    }

    pub fn covariance_matrix(&self) -> Result<Matrix<f64>, SynthError> {
        let d = self.dim();
        match &self.covariance {
            None => Ok(Matrix::identity(d)),
            Some(CovarianceSpec::Diagonal(v)) => {
                if v.len() != d {
                    return Err(self.invalid(format!("diagonal has {} entries, mean has {d}", v.len())));
                }
                Ok(Matrix::from_diagonal(v))
            }
            Some(CovarianceSpec::Full(rows)) => {
                let m = Matrix::from_rows(rows).ok_or_else(|| self.invalid("ragged covariance"))?;
                if m.shape() != (d, d) {
                    return Err(self.invalid(format!("covariance is {:?}, expected ({d}, {d})", m.shape())));
                }
                Ok(m)
            }
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.language.trim().is_empty() {
            return Err(self.invalid("empty language code"));
        }
        if self.mean.is_empty() {
            return Err(self.invalid("mean must have at least one component"));
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(self.invalid("mean has non-finite entries"));
        }
        if self.count < 2 {
            return Err(self.invalid(format!("count {} < 2", self.count)));
        }
        if !(0.0..0.5).contains(&self.outlier_fraction) {
            return Err(self.invalid(format!("outlier_fraction {} outside [0, 0.5)", self.outlier_fraction)));
        }
        if !(self.outlier_scale >= 1.0) || !self.outlier_scale.is_finite() {
            return Err(self.invalid(format!("outlier_scale {} < 1", self.outlier_scale)));
        }
        self.factor().map(|_| ())
    }

    /// Symmetric `F` with `F·F = Σ`.
    fn factor(&self) -> Result<Matrix<f64>, SynthError> {
        let cov = self.covariance_matrix()?;
        if cov.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(self.invalid("covariance has non-finite entries"));
        }
        let tol = 1e-9 * cov.trace().abs().max(1.0);
        if let Some(CovarianceSpec::Diagonal(v)) = &self.covariance {
            if let Some(&neg) = v.iter().find(|&&x| x < -tol) {
                return Err(SynthError::NonPsdCovariance {
                    language: self.language.clone(),
                    min_eigenvalue: neg,
                });
            }
            return Ok(Matrix::from_diagonal(
                &v.iter().map(|x| x.max(0.0).sqrt()).collect::<Vec<_>>(),
            ));
        }
        let eig = SymmetricEigen::new(&cov)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(SynthError::NonPsdCovariance {
                language: self.language.clone(),
                min_eigenvalue: min,
            });
        }
        Ok(sqrt_psd(&cov)?)
    }

    /// Number of rows given the outlier treatment.
    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * self.count as f64).round() as usize
    }
}

pub fn sample_cluster<T: Scalar>(spec: &ClusterSpec, seed: u64) -> Result<EmbeddingSet<T>, SynthError> {
    spec.validate()?;
    let factor = spec.factor()?;
    let d = spec.dim();
    let mut normals = SeededRng::new(seed);
    let mut outlier = vec![false; spec.count];
    for i in SeededRng::new(derive_seed(seed, OUTLIER_STREAM)).choose_indices(spec.count, spec.outlier_count()) {
        outlier[i] = true;
    }
    let mut data = Vec::with_capacity(spec.count * d);
    let mut z = vec![0.0; d];
    for &is_outlier in &outlier {
        for zi in z.iter_mut() {
            *zi = normals.standard_normal();
        }
        let scale = if is_outlier { spec.outlier_scale } else { 1.0 };
        let dev = factor.mul_vec(&z);
        data.extend(spec.mean.iter().zip(dev).map(|(&m, e)| T::lit(m + scale * e)));
    }
    Ok(EmbeddingSet::new(spec.language.clone(), Matrix::from_vec(spec.count, d, data))?)
}

/// Closed-form FID between the two specs' true Gaussians.
pub fn analytic_fid(a: &ClusterSpec, b: &ClusterSpec) -> Result<f64, SynthError> {
    for s in [a, b] {
        s.validate()?;
        if s.outlier_count() > 0 {
            return Err(SynthError::OutliersPresent(s.language.clone()));
        }
    }
    let sa = LanguageStats::from_parts(a.language.clone(), a.mean.clone(), a.covariance_matrix()?, a.count)
        .map_err(MetricError::from)?;
    let sb = LanguageStats::from_parts(b.language.clone(), b.mean.clone(), b.covariance_matrix()?, b.count)
        .map_err(MetricError::from)?;
    Ok(fid(&sa, &sb)?)
}

pub fn parse_specs(json: &str) -> Result<Vec<ClusterSpec>, SynthError> {
    let specs: Vec<ClusterSpec> = serde_json::from_str(json)?;
    check_specs(&specs)?;
    Ok(specs)
}

fn check_specs(specs: &[ClusterSpec]) -> Result<(), SynthError> {
    if specs.is_empty() {
        return Err(SynthError::NoSpecs);
    }
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.language.as_str()) {
            return Err(SynthError::DuplicateLanguage(s.language.clone()));
        }
        s.validate()?;
    }
    Ok(())
}

/// Samples every cluster and writes `<code>.emb` files plus `manifest.tsv`
/// into `out_dir`. The first spec is the query language.
pub fn build_catalog(specs: &[ClusterSpec], seed: u64, out_dir: &Path) -> Result<LanguageManifest, SynthError> {
    check_specs(specs)?;
    std::fs::create_dir_all(out_dir).map_err(|source| StoreError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let entries = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let set = sample_cluster::<f64>(spec, derive_seed(seed, i as u64))?;
            let file = PathBuf::from(format!("{}.emb", spec.language));
            save_embeddings(&set, &out_dir.join(&file))?;
            Ok(ManifestEntry {
                language: spec.language.clone(),
                path: file,
                utterance_count: Some(spec.count),
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let manifest = LanguageManifest::new(specs[0].language.clone(), entries)?;
    save_manifest(&manifest, &out_dir.join(CATALOG_MANIFEST))?;
    Ok(manifest)
}
