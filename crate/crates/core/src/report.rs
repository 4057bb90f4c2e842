//! Ranked per-language results and their CSV/JSON forms.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cosine,
    Fid,
    MisclassificationRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascending,
    Descending,
}

impl Metric {
    /// Which way "more similar" sorts: cosine and confusion rates are
    /// higher-is-closer, FID is lower-is-closer.
    pub fn direction(self) -> Direction {
        match self {
            Metric::Cosine | Metric::MisclassificationRate => Direction::Descending,
            Metric::Fid => Direction::Ascending,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Fid => "fid",
            Metric::MisclassificationRate => "misclassification_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// 1-based.
    pub rank: usize,
    pub language: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub metric: Metric,
    pub direction: Direction,
    pub k: usize,
    pub seed: Option<u64>,
    pub entries: Vec<RankedEntry>,
}

impl SimilarityReport {
    pub fn languages(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.language.as_str()).collect()
    }

    pub fn rank_of(&self, language: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.language == language).map(|e| e.rank)
    }

    /// `rank,language,value` with a header line. Values use Rust's shortest
    /// round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,language,value\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", e.rank, e.language, e.value);
        }
        out
    }
}

fn compare(a: &(String, f64), b: &(String, f64), direction: Direction) -> Ordering {
    let by_value = match direction {
        Direction::Ascending => a.1.total_cmp(&b.1),
        Direction::Descending => b.1.total_cmp(&a.1),
    };
    by_value.then_with(|| a.0.cmp(&b.0))
}

/// Sorts `(language, value)` pairs in `direction` (ties by code) and keeps the
/// first `k`. `k == 0` is treated as 1.
pub fn top_k<I, S>(values: I, k: usize, metric: Metric, direction: Direction, seed: Option<u64>) -> SimilarityReport
where
    I: IntoIterator<Item = (S, f64)>,
    S: Into<String>,
{
    let k = k.max(1);
    let mut items: Vec<(String, f64)> = values.into_iter().map(|(l, v)| (l.into(), v)).collect();
    items.sort_by(|a, b| compare(a, b, direction));
    items.truncate(k);
    SimilarityReport {
        metric,
        direction,
        k,
        seed,
        entries: items
            .into_iter()
            .enumerate()
            .map(|(i, (language, value))| RankedEntry {
                rank: i + 1,
                language,
                value,
            })
            .collect(),
    }
}

/// Ranks everything with the metric's own direction.
pub fn rank_all<I, S>(values: I, metric: Metric, seed: Option<u64>) -> SimilarityReport
where
    I: IntoIterator<Item = (S, f64)>,
    S: Into<String>,
{
    let items: Vec<(String, f64)> = values.into_iter().map(|(l, v)| (l.into(), v)).collect();
    let k = items.len();
    top_k(items, k, metric, metric.direction(), seed)
}
