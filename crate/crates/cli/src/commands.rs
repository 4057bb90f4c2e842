use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use langsim_core::audio::{curate_directory, CurationConfig, MANIFEST_FILE};
use langsim_core::classify::{confusion_profile, confusion_ranking};
use langsim_core::metrics::{score_targets, SimilarityScore};
use langsim_core::projection::{tsne, ProjectionConfig};
use langsim_core::report::{rank_all, top_k, Metric, SimilarityReport};
use langsim_core::store::{load_manifest, load_manifest_language, load_probability_matrix, LanguageManifest};
use langsim_core::synth::{build_catalog, parse_specs};
use langsim_core::Embeddings;

use crate::output::{sibling, write_file, RunReport};

#[derive(Debug, Args, Serialize)]
pub struct CurateArgs {
    /// Directory of source WAV files (not searched recursively).
    pub in_dir: PathBuf,
    /// Where packed utterances and manifest.json go.
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 16_000)]
    pub target_rate: u32,
    /// Frames with RMS below this level (dBFS) count as silence.
    #[arg(long, default_value_t = -40.0, allow_hyphen_values = true)]
    pub threshold_db: f64,
    #[arg(long, default_value_t = 20.0)]
    pub frame_ms: f64,
    /// Shortest acceptable output, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub min_dur: f64,
    /// Longest output, seconds.
    #[arg(long, default_value_t = 15.0)]
    pub max_dur: f64,
}

pub fn curate(args: &CurateArgs) -> Result<RunReport> {
    let config = CurationConfig {
        target_rate: args.target_rate,
        silence_threshold_db: args.threshold_db,
        frame_ms: args.frame_ms,
        min_duration_s: args.min_dur,
        max_duration_s: args.max_dur,
    };
    config.validate()?;
    ensure!(args.in_dir.is_dir(), "input directory {} does not exist", args.in_dir.display());
    let manifest = curate_directory(&args.in_dir, &args.out_dir, &config)?;

    let mut report = RunReport::new("curate", args, 0)?;
    for e in &manifest.errors {
        report.warnings.push(format!("skipped {}: {}", e.path, e.error));
    }
    for d in &manifest.dropped {
        report.warnings.push(format!("{d} is silent after trimming"));
    }
    for o in manifest.outputs.iter().filter(|o| o.flagged_remainder) {
        report
            .warnings
            .push(format!("{} is a short remainder ({:.3} s)", o.output_path, o.duration_s));
    }
    report.results = json!({
        "manifest": MANIFEST_FILE,
        "outputs": manifest.outputs.len(),
        "total_duration_s": manifest.outputs.iter().map(|o| o.duration_s).sum::<f64>(),
        "dropped": manifest.dropped.len(),
        "errors": manifest.errors.len(),
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Cosine,
    Fid,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Fid => Metric::Fid,
        }
    }
}

/// Which targets a similarity run scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Against {
    All,
    Top(usize),
    Codes(Vec<String>),
}

impl FromStr for Against {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Self::All);
        }
        if let Some(k) = s.strip_prefix("top:") {
            return match k.parse::<usize>() {
                Ok(k) if k > 0 => Ok(Self::Top(k)),
                _ => Err(format!("expected top:<k> with k ≥ 1, got {s:?}")),
            };
        }
        let codes: Vec<String> = s.split(',').map(|c| c.trim().to_string()).collect();
        if codes.iter().any(String::is_empty) {
            return Err(format!("empty language code in {s:?}"));
        }
        Ok(Self::Codes(codes))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimilarityArgs {
    /// Language manifest (`#query <code>` then `<code>\t<path>` lines).
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    /// `all`, `top:<k>`, or a comma-separated list of language codes.
    #[arg(long, default_value = "all")]
    pub against: String,
    /// Seed for matched subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON path; a `.csv` ranking is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Catalog {
    manifest: LanguageManifest,
    base: PathBuf,
}

impl Catalog {
    fn open(path: &Path) -> Result<Self> {
        let manifest = load_manifest(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { manifest, base })
    }

    fn load(&self, code: &str, warnings: &mut Vec<String>) -> Result<Embeddings> {
        let set = load_manifest_language(&self.manifest, &self.base, code)
            .with_context(|| format!("loading embeddings for {code}"))?;
        if let Some(n) = self.manifest.entry(code).and_then(|e| e.utterance_count) {
            if n != set.len() {
                warnings.push(format!("{code}: manifest lists {n} utterances, file has {}", set.len()));
            }
        }
        Ok(set.cast())
    }

    fn query(&self) -> &str {
        &self.manifest.query_language
    }

    fn target_codes(&self) -> Vec<String> {
        self.manifest.targets().map(|e| e.language.clone()).collect()
    }
}

fn fid_warnings(query: &Embeddings, scores: &[SimilarityScore], warnings: &mut Vec<String>) {
    for s in scores {
        if s.sample_count_query < query.dim() {
            warnings.push(format!(
                "{}: FID from {} samples in {} dimensions; covariance is rank-deficient",
                s.target,
                s.sample_count_query,
                query.dim()
            ));
        }
    }
}

/// Scores in the order the ranking lists them.
fn ranked_scores(scores: &[SimilarityScore], ranking: &SimilarityReport) -> Vec<SimilarityScore> {
    ranking
        .entries
        .iter()
        .filter_map(|e| scores.iter().find(|s| s.target == e.language).cloned())
        .collect()
}

pub fn similarity(args: &SimilarityArgs) -> Result<RunReport> {
    let against: Against = args.against.parse().map_err(anyhow::Error::msg)?;
    let metric = Metric::from(args.metric);
    let catalog = Catalog::open(&args.manifest)?;
    let codes = match &against {
        Against::Codes(codes) => {
            for c in codes {
                ensure!(catalog.manifest.entry(c).is_some(), "language {c:?} is not listed in the manifest");
            }
            codes.clone()
        }
        _ => catalog.target_codes(),
    };

    let mut report = RunReport::new("similarity", args, args.seed)?;
    let query = catalog.load(catalog.query(), &mut report.warnings)?;
    let targets = codes
        .iter()
        .map(|c| catalog.load(c, &mut report.warnings))
        .collect::<Result<Vec<_>>>()?;
    if targets.is_empty() {
        report.warnings.push("manifest has no target languages".into());
    }
    let scores = score_targets(&query, &targets, metric, args.seed)?;
    if metric == Metric::Fid {
        fid_warnings(&query, &scores, &mut report.warnings);
    }

    let seed = (metric == Metric::Fid).then_some(args.seed);
    let values = scores.iter().map(|s| (s.target.as_str(), s.value));
    let ranking = match against {
        Against::Top(k) => top_k(values, k, metric, metric.direction(), seed),
        _ => rank_all(values, metric, seed),
    };
    report.results = json!({
        "query": catalog.query(),
        "scores": ranked_scores(&scores, &ranking),
        "ranking": ranking,
    });
    if let Some(out) = &args.out {
        write_file(&sibling(out, "", "csv"), ranking.to_csv().as_bytes())?;
    }
    Ok(report)
}

#[derive(Debug, Args, Serialize)]
pub struct MisclassArgs {
    /// Classifier posteriors: header of language codes, one row per utterance.
    pub probs_csv: PathBuf,
    /// Language the utterances actually belong to.
    #[arg(long)]
    pub true_label: String,
    /// Number of confused languages to rank.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Report JSON path; a `.csv` ranking is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn misclass(args: &MisclassArgs) -> Result<RunReport> {
    let probs = load_probability_matrix(&args.probs_csv)?;
    let profile = confusion_profile(&probs, &args.true_label);
    let ranking = confusion_ranking(&profile, args.top_k);

    let mut report = RunReport::new("misclass", args, 0)?;
    if !probs.vocabulary().contains(&args.true_label) {
        report
            .warnings
            .push(format!("true label {:?} is not in the classifier vocabulary", args.true_label));
    }
    report.results = json!({ "profile": profile, "ranking": ranking });
    if let Some(out) = &args.out {
        write_file(&sibling(out, "", "csv"), ranking.to_csv().as_bytes())?;
    }
    Ok(report)
}

#[derive(Debug, Args, Serialize)]
pub struct TsneArgs {
    pub manifest: PathBuf,
    /// Comma-separated languages to pool; defaults to every manifest entry.
    #[arg(long, value_delimiter = ',')]
    pub langs: Option<Vec<String>>,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Coordinates CSV (`language,x,y`); the report JSON is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn tsne_cmd(args: &TsneArgs) -> Result<RunReport> {
    let catalog = Catalog::open(&args.manifest)?;
    let codes = match &args.langs {
        Some(codes) => codes.clone(),
        None => catalog.manifest.entries.iter().map(|e| e.language.clone()).collect(),
    };
    let config = ProjectionConfig {
        perplexity: args.perplexity,
        iterations: args.iters,
        seed: args.seed,
        ..ProjectionConfig::default()
    };

    let mut report = RunReport::new("tsne", args, args.seed)?;
    let sets = codes
        .iter()
        .map(|c| catalog.load(c, &mut report.warnings))
        .collect::<Result<Vec<_>>>()?;
    let proj = tsne(&sets, &config)?;
    write_file(&args.out, proj.to_csv().as_bytes())?;

    let counts: BTreeMap<&str, usize> = sets.iter().map(|s| (s.language(), s.len())).collect();
    let mut results = proj.sidecar_json();
    results["coordinates"] = json!(args.out.file_name().map(|f| f.to_string_lossy()));
    results["languages"] = json!(counts);
    report.results = results;
    Ok(report)
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON array of cluster specs; the first is the query language.
    pub spec_json: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<RunReport> {
    let text = std::fs::read_to_string(&args.spec_json)
        .with_context(|| format!("reading {}", args.spec_json.display()))?;
    let specs = parse_specs(&text)?;
    let manifest = build_catalog(&specs, args.seed, &args.out_dir)?;
    let mut report = RunReport::new("synth", args, args.seed)?;
    let files: Vec<_> = manifest
        .entries
        .iter()
        .map(|e| json!({ "language": e.language, "path": e.path, "count": e.utterance_count }))
        .collect();
    report.results = json!({
        "query": manifest.query_language,
        "manifest": langsim_core::synth::CATALOG_MANIFEST,
        "files": files,
    });
    Ok(report)
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    pub manifest: PathBuf,
    /// Classifier posteriors for the query's utterances.
    #[arg(long)]
    pub probs: Option<PathBuf>,
    /// True label for the posteriors; defaults to the manifest's query.
    #[arg(long)]
    pub true_label: Option<String>,
    /// How many top languages get an FID score.
    #[arg(long, default_value_t = 10)]
    pub fid_top: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON path; per-ranking CSVs are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RankComparison {
    language: String,
    cosine_rank: usize,
    fid_rank: usize,
    misclassification_rank: Option<usize>,
}

/// Position (1-based) of each of `subset` within `ranking`, relative to the
/// other members of `subset`.
fn relative_ranks(ranking: &SimilarityReport, subset: &[String]) -> BTreeMap<String, usize> {
    ranking
        .entries
        .iter()
        .filter(|e| subset.contains(&e.language))
        .enumerate()
        .map(|(i, e)| (e.language.clone(), i + 1))
        .collect()
}

pub fn report(args: &ReportArgs) -> Result<RunReport> {
    ensure!(args.fid_top > 0, "--fid-top must be at least 1");
    let catalog = Catalog::open(&args.manifest)?;
    let mut report = RunReport::new("report", args, args.seed)?;
    let query = catalog.load(catalog.query(), &mut report.warnings)?;
    let codes = catalog.target_codes();
    if codes.is_empty() {
        bail!("manifest lists no target languages besides {}", catalog.query());
    }
    let targets = codes
        .iter()
        .map(|c| catalog.load(c, &mut report.warnings))
        .collect::<Result<Vec<_>>>()?;

    let cosine_scores = score_targets(&query, &targets, Metric::Cosine, args.seed)?;
    let cosine = rank_all(cosine_scores.iter().map(|s| (s.target.as_str(), s.value)), Metric::Cosine, None);

    let confusion = match &args.probs {
        Some(path) => {
            let probs = load_probability_matrix(path)?;
            let label = args.true_label.as_deref().unwrap_or(catalog.query());
            let profile = confusion_profile(&probs, label);
            let ranking = confusion_ranking(&profile, args.fid_top);
            Some((profile, ranking))
        }
        None => None,
    };

    let (basis, candidates): (&str, Vec<String>) = match &confusion {
        Some((_, mr)) => {
            let mut picked = Vec::new();
            for lang in mr.languages() {
                if codes.iter().any(|c| c == lang) {
                    picked.push(lang.to_string());
                } else {
                    report
                        .warnings
                        .push(format!("{lang} is among the most confused languages but has no embeddings"));
                }
            }
            ("misclassification", picked)
        }
        None => (
            "cosine",
            cosine.languages().into_iter().take(args.fid_top).map(String::from).collect(),
        ),
    };

    let selected: Vec<Embeddings> = candidates
        .iter()
        .map(|c| targets[codes.iter().position(|x| x == c).expect("candidate comes from codes")].clone())
        .collect();
    let fid_scores = score_targets(&query, &selected, Metric::Fid, args.seed)?;
    fid_warnings(&query, &fid_scores, &mut report.warnings);
    let fid = rank_all(fid_scores.iter().map(|s| (s.target.as_str(), s.value)), Metric::Fid, Some(args.seed));

    let cos_rel = relative_ranks(&cosine, &candidates);
    let fid_rel = relative_ranks(&fid, &candidates);
    let mr_rel = confusion.as_ref().map(|(_, mr)| relative_ranks(mr, &candidates));
    let mut comparison = Vec::new();
    let mut notes = Vec::new();
    for e in &fid.entries {
        let lang = &e.language;
        let row = RankComparison {
            language: lang.clone(),
            cosine_rank: cos_rel[lang],
            fid_rank: fid_rel[lang],
            misclassification_rank: mr_rel.as_ref().and_then(|m| m.get(lang).copied()),
        };
        let mut parts = Vec::new();
        if row.cosine_rank != row.fid_rank {
            parts.push(format!("cosine rank {} vs FID rank {}", row.cosine_rank, row.fid_rank));
        }
        if let Some(mr) = row.misclassification_rank.filter(|&r| r != row.fid_rank) {
            parts.push(format!("misclassification rank {mr} vs FID rank {}", row.fid_rank));
        }
        if !parts.is_empty() {
            notes.push(format!("{lang}: {}", parts.join("; ")));
        }
        comparison.push(row);
    }

    let (profile, mr_ranking) = match confusion {
        Some((p, r)) => (Some(p), Some(r)),
        None => (None, None),
    };
    report.results = json!({
        "query": catalog.query(),
        "cosine": cosine,
        "fid_selection": { "basis": basis, "k": args.fid_top, "languages": candidates },
        "fid": fid,
        "fid_scores": ranked_scores(&fid_scores, &fid),
        "confusion": profile,
        "misclassification": mr_ranking,
        "comparison": comparison,
        "consistent": notes.is_empty(),
        "notes": notes,
    });
    if let Some(out) = &args.out {
        write_file(&sibling(out, "cosine", "csv"), cosine.to_csv().as_bytes())?;
        write_file(&sibling(out, "fid", "csv"), fid.to_csv().as_bytes())?;
        if let Some(mr) = &mr_ranking {
            write_file(&sibling(out, "misclass", "csv"), mr.to_csv().as_bytes())?;
        }
    }
    Ok(report)
}
