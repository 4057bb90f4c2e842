//! Acceptance suite. Every criterion prints one PASS/FAIL line; the test fails
//! if any criterion fails. Run with
//! `cargo test -p langsim-cli --test acceptance -- --nocapture` to see the lines.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use langsim_core::audio::{
    concatenate_to_target, encode_wav_f32, encode_wav_pcm16, parse_wav, resample, trim_silence, AudioClip,
    CurationConfig,
};
use langsim_core::classify::confusion_profile;
use langsim_core::linalg::Matrix;
use langsim_core::metrics::{cosine_similarity, fid, fid_matched};
use langsim_core::projection::{kl_divergence, kl_gradient, pairwise_affinities, tsne, ProjectionConfig};
use langsim_core::rng::SeededRng;
use langsim_core::stats::LanguageStats;
use langsim_core::store::{EmbeddingSet, ProbabilityMatrix};
use langsim_core::synth::{analytic_fid, sample_cluster, ClusterSpec, CovarianceSpec};
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normals(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

/// Random orthogonal d×d matrix by Gram–Schmidt on Gaussian columns.
fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Matrix<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = normals(rng, d);
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut q = Matrix::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            q.as_mut_slice()[i * d + j] = x;
        }
    }
    q
}

/// Q diag(eig) Qᵀ with eigenvalues drawn from [lo, hi).
fn random_spd(d: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Matrix<f64> {
    let q = random_orthogonal(d, rng);
    let eig: Vec<f64> = (0..d).map(|_| lo + (hi - lo) * rng.uniform_open0()).collect();
    let mut m = q.matmul(&Matrix::from_diagonal(&eig)).unwrap().matmul(&q.transpose()).unwrap();
    m.symmetrize();
    m
}

fn random_stats(d: usize, rng: &mut SeededRng) -> LanguageStats<f64> {
    let cov = random_spd(d, 0.05, 3.0, rng);
    LanguageStats::from_parts("x", normals(rng, d), cov, 100).unwrap()
}

// 1 ------------------------------------------------------------------------

fn fid_self_distance() -> Outcome {
    let mut rng = SeededRng::new(101);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let d = [4, 64, 256][i % 3];
        let s = random_stats(d, &mut rng);
        let v = fid(&s, &s).map_err(|e| e.to_string())?;
        worst = worst.max(v.abs());
        check(v <= 1e-6, || format!("instance {i} (d={d}): fid(s,s) = {v:e}"))?;
    }
    Ok(format!("max |fid(s,s)| = {worst:.2e} over 20 instances"))
}

// 2 ------------------------------------------------------------------------

fn full_spec(lang: &str, mean: Vec<f64>, cov: &Matrix<f64>, count: usize) -> ClusterSpec {
    ClusterSpec {
        language: lang.into(),
        mean,
        covariance: Some(CovarianceSpec::Full(cov.to_rows())),
        count,
        outlier_fraction: 0.0,
        outlier_scale: 1.0,
    }
}

/// Five d=8 pairs, covariance eigenvalues in [0.1, 2), means 2–3 apart.
fn spec_pairs() -> Vec<(ClusterSpec, ClusterSpec)> {
    let mut rng = SeededRng::new(202);
    (0..5)
        .map(|_| {
            let d = 8;
            let ma = normals(&mut rng, d);
            let dir = normals(&mut rng, d);
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let len = 2.0 + rng.uniform_open0();
            let mb: Vec<f64> = ma.iter().zip(&dir).map(|(a, u)| a + len * u / norm).collect();
            let ca = random_spd(d, 0.1, 2.0, &mut rng);
            let cb = random_spd(d, 0.1, 2.0, &mut rng);
            (full_spec("a", ma, &ca, 0), full_spec("b", mb, &cb, 0))
        })
        .collect()
}

fn empirical_fid(a: &ClusterSpec, b: &ClusterSpec, n: usize, seed: u64) -> Result<f64, String> {
    let a = ClusterSpec { count: n, ..a.clone() };
    let b = ClusterSpec { count: n, ..b.clone() };
    let x: EmbeddingSet<f64> = sample_cluster(&a, 2 * seed).map_err(|e| e.to_string())?;
    let y: EmbeddingSet<f64> = sample_cluster(&b, 2 * seed + 1).map_err(|e| e.to_string())?;
    Ok(fid_matched(&x, &y, seed).map_err(|e| e.to_string())?.value)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn fid_analytic_agreement() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (a, b)) in spec_pairs().iter().enumerate() {
        let truth = analytic_fid(&ClusterSpec { count: 2, ..a.clone() }, &ClusterSpec { count: 2, ..b.clone() })
            .map_err(|e| e.to_string())?;
        let got = empirical_fid(a, b, 5000, 0)?;
        let rel = (got - truth).abs() / truth;
        worst = worst.max(rel);
        check(rel <= 0.05, || format!("pair {i}: empirical {got:.4} vs analytic {truth:.4} ({:.2}%)", rel * 100.0))?;

        let mut medians = Vec::new();
        for n in [200, 1000, 5000] {
            let errs = (0..10)
                .map(|s| empirical_fid(a, b, n, s).map(|v| (v - truth).abs() / truth))
                .collect::<Result<Vec<_>, _>>()?;
            medians.push(median(errs));
        }
        check(medians.windows(2).all(|w| w[1] <= w[0]), || {
            format!("pair {i}: median relative error not non-increasing over n=200/1000/5000: {medians:?}")
        })?;
    }
    Ok(format!("worst relative error at n=5000: {:.2}%", worst * 100.0))
}

// 3 ------------------------------------------------------------------------

fn fid_equal_covariance() -> Outcome {
    let mut rng = SeededRng::new(303);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let d = [3, 8, 32][i % 3];
        let cov = random_spd(d, 0.1, 5.0, &mut rng);
        let mq = normals(&mut rng, d);
        let mt = normals(&mut rng, d);
        let expected: f64 = mq.iter().zip(&mt).map(|(a, b)| (a - b).powi(2)).sum();
        let q = LanguageStats::from_parts("q", mq, cov.clone(), 50).unwrap();
        let t = LanguageStats::from_parts("t", mt, cov, 50).unwrap();
        let got = fid(&q, &t).map_err(|e| e.to_string())?;
        let rel = (got - expected).abs() / expected;
        worst = worst.max(rel);
        check(rel <= 1e-8, || format!("instance {i}: fid {got} vs ‖Δμ‖² {expected} (rel {rel:e})"))?;
    }
    Ok(format!("worst relative deviation {worst:.2e}"))
}

// 4 ------------------------------------------------------------------------

fn cosine_contract() -> Outcome {
    let anchors = [
        (vec![1.0, 0.0], vec![1.0, 0.0], 1.0),
        (vec![1.0, 0.0], vec![0.0, 1.0], 0.0),
        (vec![1.0, 1.0], vec![1.0, 0.0], 1.0 / 2f64.sqrt()),
    ];
    for (a, b, want) in &anchors {
        let got = cosine_similarity(a, b).map_err(|e| e.to_string())?;
        check((got - want).abs() <= 1e-15, || format!("anchor {a:?}·{b:?}: {got} vs {want}"))?;
    }
    let mut rng = SeededRng::new(404);
    let mut worst_scale: f64 = 0.0;
    for i in 0..2000 {
        let d = 1 + (rng.below(64) as usize);
        let a = normals(&mut rng, d);
        let b = normals(&mut rng, d);
        let ab = cosine_similarity(&a, &b).map_err(|e| e.to_string())?;
        let ba = cosine_similarity(&b, &a).map_err(|e| e.to_string())?;
        check((-1.0..=1.0).contains(&ab), || format!("pair {i}: {ab} outside [-1, 1]"))?;
        check(ab == ba, || format!("pair {i}: asymmetric {ab} vs {ba}"))?;
        let s = 10f64.powf(6.0 * rng.uniform_open0() - 3.0);
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let sv = cosine_similarity(&scaled, &b).map_err(|e| e.to_string())?;
        worst_scale = worst_scale.max((sv - ab).abs());
        check((sv - ab).abs() <= 1e-12, || format!("pair {i}: scale {s} moved cosine by {:e}", (sv - ab).abs()))?;
    }
    Ok(format!("3 anchors exact, 2000 random pairs; worst scale drift {worst_scale:.1e}"))
}

// 5 ------------------------------------------------------------------------

fn confusion_oracle() -> Outcome {
    let mut rng = SeededRng::new(505);
    let mut oov = 0;
    for inst in 0..100 {
        let k = 2 + rng.below(9) as usize;
        let n = 1 + rng.below(50) as usize;
        let vocab: Vec<String> = (0..k).map(|j| format!("l{j}")).collect();
        let mut data = Vec::with_capacity(n * k);
        for _ in 0..n {
            // coarse values make exact argmax ties likely
            let row: Vec<f64> = (0..k).map(|_| (rng.below(4) + 1) as f64).collect();
            let s: f64 = row.iter().sum();
            data.extend(row.iter().map(|v| v / s));
        }
        let probs = ProbabilityMatrix::new(vocab.clone(), Matrix::from_vec(n, k, data.clone()))
            .map_err(|e| e.to_string())?;
        let true_label = if inst % 5 == 0 {
            oov += 1;
            "unseen".to_string()
        } else {
            vocab[rng.below(k as u64) as usize].clone()
        };

        // naive oracle: count first-maximum predictions
        let mut counts = vec![0usize; k];
        for r in 0..n {
            let row = &data[r * k..(r + 1) * k];
            let mut best = 0;
            for j in 0..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            counts[best] += 1;
        }
        let correct = vocab.iter().position(|v| *v == true_label).map_or(0, |j| counts[j]);
        let expected_mr = (n - correct) as f64 / n as f64;

        let p = confusion_profile(&probs, &true_label);
        check(p.total == n, || format!("instance {inst}: total {} vs {n}", p.total))?;
        check(p.overall_mr == expected_mr, || {
            format!("instance {inst}: overall_mr {} vs oracle {expected_mr}", p.overall_mr)
        })?;
        let expected: Vec<(String, f64)> = vocab
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v.clone(), c as f64 / n as f64))
            .collect();
        let got: Vec<(String, f64)> = p.per_language.into_iter().collect();
        check(got == expected, || format!("instance {inst}: per-language {got:?} vs oracle {expected:?}"))?;
        if inst % 5 == 0 {
            check(p.overall_mr == 1.0, || format!("instance {inst}: OOV overall_mr {}", p.overall_mr))?;
        }
    }
    Ok(format!("100 instances match exactly ({oov} with out-of-vocabulary true label)"))
}

// CLI helpers --------------------------------------------------------------

fn langsim(args: &[&str], dir: &Path, threads: Option<usize>) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_langsim"));
    cmd.args(args).current_dir(dir);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t.to_string());
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("langsim {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn ranking_languages(report: &Value) -> Vec<String> {
    report["entries"]
        .as_array()
        .map(|a| a.iter().filter_map(|e| e["language"].as_str().map(String::from)).collect())
        .unwrap_or_default()
}

/// Query at 5·e₁, targets t01..t10 at 5·e₁ + k·e₂, Σ = I.
fn offset_catalog(n: usize, outlier: Option<(&str, f64, f64)>) -> Value {
    let d = 8;
    let mut q = vec![0.0; d];
    q[0] = 5.0;
    let mut specs = vec![json!({"language": "q", "mean": q, "count": n})];
    for k in 1..=10 {
        let mut m = q.clone();
        m[1] = k as f64;
        let code = format!("t{k:02}");
        let mut s = json!({"language": code, "mean": m, "count": n});
        if let Some((lang, frac, scale)) = outlier {
            if lang == code {
                s["outlier_fraction"] = json!(frac);
                s["outlier_scale"] = json!(scale);
            }
        }
        specs.push(s);
    }
    Value::Array(specs)
}

fn write_catalog(dir: &Path, name: &str, specs: &Value, seed: u64) -> Result<PathBuf, String> {
    let spec_path = format!("{name}.json");
    fs::write(dir.join(&spec_path), specs.to_string()).map_err(|e| e.to_string())?;
    langsim(&["synth", &spec_path, "--seed", &seed.to_string(), "--out-dir", name], dir, None)?;
    Ok(PathBuf::from(name).join("manifest.tsv"))
}

// 6 ------------------------------------------------------------------------

fn ranking_recovery() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let manifest = write_catalog(dir, "cat", &offset_catalog(2000, None), 6)?;
    let manifest = manifest.to_str().unwrap();
    let expected: Vec<String> = (1..=10).map(|k| format!("t{k:02}")).collect();
    for metric in ["fid", "cosine"] {
        let out = format!("{metric}.json");
        langsim(&["similarity", manifest, "--metric", metric, "--against", "all", "--out", &out], dir, None)?;
        let got = ranking_languages(&read_json(&dir.join(&out))?["results"]["ranking"]);
        check(got == expected, || format!("{metric} ranking {got:?} differs from offset order"))?;
    }
    Ok("fid and cosine rankings equal offset order t01..t10 (n=2000, seed 6)".into())
}

// 7 ------------------------------------------------------------------------

fn rank_in(ranking: &Value, lang: &str) -> Option<usize> {
    ranking_languages(ranking).iter().position(|l| l == lang).map(|p| p + 1)
}

fn value_in(ranking: &Value, lang: &str) -> Option<f64> {
    ranking["entries"].as_array()?.iter().find(|e| e["language"] == lang)?["value"].as_f64()
}

fn outlier_divergence() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let target = "t02";
    let mut results = Vec::new();
    for (name, scale) in [("clean", 1.0), ("inflated", 10.0)] {
        let m = write_catalog(dir, name, &offset_catalog(2000, Some((target, 0.05, scale))), 7)?;
        let out = format!("{name}.report.json");
        langsim(&["report", m.to_str().unwrap(), "--out", &out], dir, None)?;
        results.push(read_json(&dir.join(&out))?["results"].clone());
    }
    let (clean, inflated) = (&results[0], &results[1]);

    let fid_before = rank_in(&clean["fid"], target).ok_or("target missing from clean FID ranking")?;
    let fid_after = rank_in(&inflated["fid"], target).ok_or("target missing from inflated FID ranking")?;
    check(fid_after > fid_before, || format!("FID rank of {target} did not worsen: {fid_before} → {fid_after}"))?;

    let cos_before = value_in(&clean["cosine"], target).ok_or("target missing from cosine ranking")?;
    let cos_after = value_in(&inflated["cosine"], target).ok_or("target missing from cosine ranking")?;
    let shift = (cos_after - cos_before).abs();
    check(shift <= 0.02, || format!("cosine of {target} moved by {shift:.4}"))?;
    let order_before = ranking_languages(&clean["cosine"]);
    let order_after = ranking_languages(&inflated["cosine"]);
    check(order_before == order_after, || format!("cosine order changed: {order_before:?} → {order_after:?}"))?;
    check(inflated["consistent"] == json!(false), || "report did not flag the disagreement".into())?;
    Ok(format!(
        "{target}: FID rank {fid_before} → {fid_after}, cosine rank {} unchanged, cosine shift {shift:.4}",
        rank_in(&inflated["cosine"], target).unwrap_or(0)
    ))
}

// 8 ------------------------------------------------------------------------

fn neighbor_purity(points: &Matrix<f64>, labels: &[String], k: usize) -> f64 {
    let n = points.rows();
    let pure = (0..n)
        .filter(|&i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (points.row(i), points.row(j));
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2), j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            2 * d[..k].iter().filter(|(_, j)| labels[*j] == labels[i]).count() > k
        })
        .count();
    pure as f64 / n as f64
}

fn tsne_numerics() -> Outcome {
    let mut rng = SeededRng::new(808);
    let x = Matrix::from_vec(10, 6, normals(&mut rng, 60));
    let p = pairwise_affinities(&x, 3.0).map_err(|e| e.to_string())?;
    let total: f64 = p.as_slice().iter().sum();
    check((total - 1.0).abs() <= 1e-9, || format!("P sums to {total}"))?;

    let y = Matrix::from_vec(10, 2, normals(&mut rng, 20));
    let g = kl_gradient(&p, &y, 1.0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for idx in 0..20 {
        let mut plus = y.clone();
        plus.as_mut_slice()[idx] += h;
        let mut minus = y.clone();
        minus.as_mut_slice()[idx] -= h;
        let fd = (kl_divergence(&p, &plus) - kl_divergence(&p, &minus)) / (2.0 * h);
        let a = g.as_slice()[idx];
        let rel = (a - fd).abs() / a.abs().max(1e-8);
        worst = worst.max(rel);
        check(rel <= 1e-4, || format!("coordinate {idx}: analytic {a} vs finite difference {fd}"))?;
    }

    let sets: Vec<EmbeddingSet<f64>> = (0..3)
        .map(|c| {
            let mut mean = vec![0.0; 8];
            mean[c] = 10.0 / 2f64.sqrt();
            sample_cluster(&ClusterSpec::isotropic(format!("c{c}"), mean, 1.0, 30), 800 + c as u64).unwrap()
        })
        .collect();
    let config = ProjectionConfig { perplexity: 20.0, seed: 8, ..ProjectionConfig::default() };
    let proj = tsne(&sets, &config).map_err(|e| e.to_string())?;
    check(proj.final_kl < proj.initial_kl, || {
        format!("final KL {} not below initial {}", proj.final_kl, proj.initial_kl)
    })?;
    let purity = neighbor_purity(&proj.points, &proj.labels, 5);
    check(purity >= 0.9, || format!("3-cluster 5-NN purity {purity:.3}"))?;
    Ok(format!(
        "gradient rel err ≤ {worst:.1e}, ΣP−1 = {:.1e}, KL {:.3} → {:.3}, purity {:.3}",
        total - 1.0,
        proj.initial_kl,
        proj.final_kl,
        purity
    ))
}

// 9 ------------------------------------------------------------------------

fn sine(freq: f64, amp: f64, rate: u32, n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| (amp * (TAU * freq * i as f64 / f64::from(rate)).sin()) as f32)
        .collect()
}

fn dtft_magnitude(x: &[f32], rate: u32, freq: f64) -> f64 {
    let n = x.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &s) in x.iter().enumerate() {
        let w = 0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos();
        let ph = TAU * freq * i as f64 / f64::from(rate);
        re += w * f64::from(s) * ph.cos();
        im -= w * f64::from(s) * ph.sin();
    }
    re.hypot(im)
}

fn peak_frequency(x: &[f32], rate: u32, lo: f64, hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-3 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if dtft_magnitude(x, rate, c) > dtft_magnitude(x, rate, d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

/// Least-squares amplitude of a sinusoid at `freq`; `x[0]` is at sample `offset`.
fn fitted_amplitude(x: &[f32], offset: usize, rate: u32, freq: f64) -> f64 {
    let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let (s, c) = (TAU * freq * (i + offset) as f64 / f64::from(rate)).sin_cos();
        let v = f64::from(v);
        ss += s * s;
        cc += c * c;
        sc += s * c;
        xs += v * s;
        xc += v * c;
    }
    let det = ss * cc - sc * sc;
    ((xs * cc - xc * sc) / det).hypot((xc * ss - xs * sc) / det)
}

fn audio_pipeline() -> Outcome {
    let mut rng = SeededRng::new(909);

    // PCM16 round trip, including both extremes
    let mut ints: Vec<i16> = vec![i16::MIN, i16::MAX, 0, -1, 1];
    ints.extend((0..5000).map(|_| (rng.below(65536) as i64 - 32768) as i16));
    let clip = AudioClip::new(ints.iter().map(|&v| f32::from(v) / 32768.0).collect(), 16_000, "rt");
    let bytes = encode_wav_pcm16(&clip);
    let back = parse_wav(&bytes, "rt").map_err(|e| e.to_string())?;
    check(back.samples == clip.samples, || "PCM16 decode(encode(x)) != x".into())?;
    check(encode_wav_pcm16(&back) == bytes, || "PCM16 re-encode differs".into())?;

    // trimming: noise / tone / noise, 1 s each at 16 kHz
    let cfg = CurationConfig::default();
    let rate = 16_000usize;
    let frame = 320;
    for (lead, tail) in [(rate, rate), (rate + 137, 2 * rate - 59), (0, 0)] {
        let mut s: Vec<f32> = (0..lead).map(|_| (rng.standard_normal() * 1e-4) as f32).collect();
        s.extend(sine(440.0, 0.5, 16_000, rate));
        s.extend((0..tail).map(|_| (rng.standard_normal() * 1e-4) as f32));
        let clip = AudioClip::new(s, 16_000, "t");
        let once = trim_silence(&clip, &cfg);
        let start = clip
            .samples
            .windows(once.len())
            .position(|w| w == once.samples.as_slice())
            .ok_or("trimmed clip is not a contiguous span of the input")?;
        let end = start + once.len();
        check(start <= lead && lead - start < frame, || format!("lead {lead}: trim starts at {start}"))?;
        check(end >= lead + rate && end - (lead + rate) < frame, || {
            format!("tone ends at {}: trim ends at {end}", lead + rate)
        })?;
        check(trim_silence(&once, &cfg) == once, || format!("lead {lead}: trim is not idempotent"))?;
    }

    // packing at a 100 Hz toy rate so durations are cheap
    let pack_cfg = CurationConfig { target_rate: 100, ..CurationConfig::default() };
    let mut packed_total = 0;
    for trial in 0..200 {
        let clips: Vec<AudioClip> = (0..rng.below(25))
            .map(|i| {
                let n = 1 + rng.below(2000) as usize;
                AudioClip::new((0..n).map(|k| ((i as usize * 131 + k) % 251) as f32 / 251.0).collect(), 100, "c")
            })
            .collect();
        let out = concatenate_to_target(&clips, &pack_cfg).map_err(|e| e.to_string())?;
        let input: Vec<f32> = clips.iter().flat_map(|c| c.samples.iter().copied()).collect();
        let output: Vec<f32> = out.iter().flat_map(|u| u.clip.samples.iter().copied()).collect();
        check(input == output, || format!("trial {trial}: packing does not conserve samples"))?;
        for u in &out {
            let d = u.clip.duration_s();
            let single_oversize = u.sources.len() == 1 && d > pack_cfg.max_duration_s;
            check(u.flagged_remainder || single_oversize || (10.0..=15.0).contains(&d), || {
                format!("trial {trial}: unflagged output of {d} s")
            })?;
            check(!u.flagged_remainder || d < 10.0, || format!("trial {trial}: flagged output of {d} s"))?;
        }
        packed_total += out.len();
    }

    // 1 kHz through 44.1 kHz → 16 kHz
    let src = AudioClip::new(sine(1000.0, 0.5, 44_100, 44_100), 44_100, "sine");
    let out = resample(&src, 16_000);
    check(out.len() == 16_000, || format!("resampled length {}", out.len()))?;
    let interior = &out.samples[1000..15_000];
    let f = peak_frequency(interior, 16_000, 980.0, 1020.0);
    check((f - 1000.0).abs() <= 1.0, || format!("peak frequency {f:.3} Hz"))?;
    let amp = fitted_amplitude(interior, 1000, 16_000, f);
    check((amp - 0.5).abs() / 0.5 <= 0.01, || format!("amplitude {amp:.5}"))?;

    Ok(format!(
        "PCM16 exact; trim within one frame; {packed_total} packed outputs checked; sine {f:.3} Hz, amplitude {amp:.5}"
    ))
}

// 10 -----------------------------------------------------------------------

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn write_recordings(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    for (i, secs) in [4.5, 6.0, 3.0, 7.5, 2.0].iter().enumerate() {
        let rate = [44_100, 48_000, 22_050][i % 3];
        let n = (secs * f64::from(rate)) as usize;
        let mut s = vec![0.0f32; rate as usize / 5];
        s.extend(sine(220.0 * (i + 1) as f64, 0.3, rate, n));
        s.extend(vec![0.0f32; rate as usize / 4]);
        fs::write(dir.join(format!("rec_{i}.wav")), encode_wav_f32(&AudioClip::new(s, rate, "r")))
            .map_err(|e| e.to_string())?;
    }
    fs::write(dir.join("corrupt.wav"), b"RIFF\x10\x00\x00\x00WAVEjunk").map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let mut specs = offset_catalog(300, Some(("t03", 0.05, 10.0)));
    specs.as_array_mut().unwrap()[0]["count"] = json!(400);
    fs::write(dir.join("specs.json"), specs.to_string()).map_err(|e| e.to_string())?;
    fs::write(
        dir.join("probs.csv"),
        "q,t01,t02,t03,t05\n0.6,0.1,0.1,0.1,0.1\n0.2,0.5,0.1,0.1,0.1\n0.1,0.1,0.1,0.6,0.1\n0.3,0.3,0.2,0.1,0.1\n0.1,0.2,0.6,0.05,0.05\n",
    )
    .map_err(|e| e.to_string())?;
    write_recordings(&dir.join("recordings"))?;

    let commands: Vec<Vec<&str>> = vec![
        vec!["synth", "specs.json", "--seed", "10", "--out-dir", "out/cat"],
        vec!["similarity", "out/cat/manifest.tsv", "--metric", "fid", "--seed", "3", "--out", "out/fid.json"],
        vec!["similarity", "out/cat/manifest.tsv", "--metric", "cosine", "--against", "top:4", "--out", "out/cos.json"],
        vec!["misclass", "probs.csv", "--true-label", "q", "--top-k", "3", "--out", "out/mc.json"],
        vec!["tsne", "out/cat/manifest.tsv", "--langs", "q,t01,t05", "--perplexity", "25", "--seed", "4", "--out", "out/xy.csv"],
        vec!["report", "out/cat/manifest.tsv", "--probs", "probs.csv", "--seed", "9", "--out", "out/report.json"],
        vec!["report", "out/cat/manifest.tsv", "--out", "out/report_noprobs.json"],
        vec!["curate", "recordings", "out/curated"],
    ];
    let mut runs = Vec::new();
    for threads in [1, 4] {
        let _ = fs::remove_dir_all(dir.join("out"));
        let mut stdout = Vec::new();
        for args in &commands {
            stdout.push(langsim(args, dir, Some(threads))?);
        }
        runs.push((stdout, snapshot(&dir.join("out"))));
    }
    let (a, b) = (&runs[0], &runs[1]);
    for (i, args) in commands.iter().enumerate() {
        check(a.0[i] == b.0[i], || format!("stdout of {} differs between 1 and 4 threads", args[0]))?;
    }
    check(a.1.len() == b.1.len(), || "different sets of output files".into())?;
    for ((pa, ba), (pb, bb)) in a.1.iter().zip(&b.1) {
        check(pa == pb && ba == bb, || format!("{} differs between 1 and 4 threads", pa.display()))?;
    }
    Ok(format!(
        "{} commands, {} output files byte-identical with RAYON_NUM_THREADS=1 and 4",
        commands.len(),
        a.1.len()
    ))
}

// ---------------------------------------------------------------------------

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "FID self-distance", Some(Duration::from_secs(5)), fid_self_distance),
        (2, "FID analytic agreement", Some(Duration::from_secs(60)), fid_analytic_agreement),
        (3, "FID equal-covariance closed form", None, fid_equal_covariance),
        (4, "cosine contract", None, cosine_contract),
        (5, "confusion oracle", None, confusion_oracle),
        (6, "ranking recovery", Some(Duration::from_secs(30)), ranking_recovery),
        (7, "outlier divergence", None, outlier_divergence),
        (8, "t-SNE numerics", Some(Duration::from_secs(60)), tsne_numerics),
        (9, "audio pipeline", None, audio_pipeline),
        (10, "determinism", None, determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, run) in criteria {
        let t0 = Instant::now();
        let mut outcome = run();
        let elapsed = t0.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, budget) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                println!("FAIL criterion {id:>2} {name}: {why} [{elapsed:.2?}]");
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
