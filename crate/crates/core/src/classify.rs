//! Misclassification rate and per-language confusion rates from classifier
//! probability rows.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{top_k, Direction, Metric, SimilarityReport};
use crate::store::ProbabilityMatrix;

/// How often utterances of `true_label` were assigned to each language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionProfile {
    pub true_label: String,
    /// Number of utterances.
    pub total: usize,
    /// Fraction of utterances whose prediction differs from `true_label`.
    pub overall_mr: f64,
    /// Fraction predicted as each language. Only languages that were predicted
    /// at least once appear; the true label appears too when it was predicted,
    /// so the values sum to 1 and the entries other than `true_label` sum to
    /// `overall_mr`.
    pub per_language: BTreeMap<String, f64>,
}

impl ConfusionProfile {
    /// Fraction of utterances predicted correctly (0 when the true label is
    /// outside the vocabulary).
    pub fn correct_rate(&self) -> f64 {
        self.per_language.get(&self.true_label).copied().unwrap_or(0.0)
    }
}

/// Argmax index of a row; ties go to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Predicted code per row: the vocabulary entry with the highest probability,
/// lowest index on ties.
pub fn predict_labels(probs: &ProbabilityMatrix) -> Vec<&str> {
    let vocab = probs.vocabulary();
    let rows = probs.rows();
    (0..rows.rows())
        .into_par_iter()
        .map(|i| vocab[argmax(rows.row(i))].as_str())
        .collect()
}

/// Confusion rates for utterances whose ground truth is `true_label`. The label
/// need not be in the vocabulary, in which case every utterance counts as a
/// misclassification.
pub fn confusion_profile(probs: &ProbabilityMatrix, true_label: &str) -> ConfusionProfile {
    let predicted = predict_labels(probs);
    let total = predicted.len();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &predicted {
        *counts.entry(p).or_default() += 1;
    }
    let wrong = predicted.iter().filter(|&&p| p != true_label).count();
    let n = total as f64;
    ConfusionProfile {
        true_label: true_label.to_string(),
        total,
        overall_mr: if total == 0 { 0.0 } else { wrong as f64 / n },
        per_language: counts
            .into_iter()
            .map(|(code, c)| (code.to_string(), c as f64 / n))
            .collect(),
    }
}

/// The `k` languages the true label is most often confused with (the true
/// label itself is excluded).
pub fn confusion_ranking(profile: &ConfusionProfile, k: usize) -> SimilarityReport {
    top_k(
        profile
            .per_language
            .iter()
            .filter(|(code, _)| **code != profile.true_label)
            .map(|(code, &rate)| (code.clone(), rate)),
        k,
        Metric::MisclassificationRate,
        Direction::Descending,
        None,
    )
}
