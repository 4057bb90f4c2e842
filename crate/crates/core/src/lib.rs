//! Acoustic similarity between a query language and a catalog of reference
//! languages in a shared speech-embedding space.
//!
//! Three views of "how close is language A to language B" are provided:
//!
//! * [`classify`]: how often a language-ID classifier assigns the query's
//!   utterances to each reference language (misclassification rates).
//! * [`metrics::cosine_similarity`] between per-language centroids.
//! * [`metrics::fid`], the Fréchet distance between Gaussians fitted to the
//!   two embedding distributions, with matched-count subsampling.
//!
//! Around them sit the on-disk formats ([`store`]), distribution statistics
//! ([`stats`]), t-SNE projection ([`projection`]), recording curation
//! ([`audio`]) and a synthetic Gaussian catalog generator with closed-form
//! ground truth ([`synth`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the usual choices. Embedding files are single precision, analysis runs
//! in double precision.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod classify;
pub mod linalg;
pub mod metrics;
pub mod projection;
pub mod report;
pub mod rng;
mod scalar;
pub mod stats;
pub mod store;
pub mod synth;

pub use scalar::Scalar;

/// Embedding set as stored on disk.
pub type StoredEmbeddings = store::EmbeddingSet<f32>;
/// Embedding set used for analysis.
pub type Embeddings = store::EmbeddingSet<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type LanguageStats64 = stats::LanguageStats<f64>;
pub type LanguageStats32 = stats::LanguageStats<f32>;
pub type Projection = projection::Projection2D<f64>;
