use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    concatenate_to_target, parse_wav, resample, silence_bounds, write_wav_pcm16, AudioClip, AudioError,
    CurationConfig, SourceSpan,
};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedOutput {
    /// Relative to the output directory.
    pub output_path: String,
    pub duration_s: f64,
    /// Spans are in samples of the source after resampling to the target rate.
    pub sources: Vec<SourceSpan>,
    pub flagged_remainder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationManifest {
    pub config: CurationConfig,
    pub outputs: Vec<CuratedOutput>,
    /// Inputs that were entirely silent after trimming.
    pub dropped: Vec<String>,
    pub errors: Vec<FileError>,
}

enum Prepared {
    Kept { clip: AudioClip, offset: usize },
    Silent,
}

fn prepare(path: &Path, name: &str, config: &CurationConfig) -> Result<Prepared, AudioError> {
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let clip = resample(&parse_wav(&bytes, name)?, config.target_rate);
    let (start, end) = silence_bounds(&clip.samples, clip.sample_rate, config);
    if start == end {
        return Ok(Prepared::Silent);
    }
    Ok(Prepared::Kept {
        clip: AudioClip::new(clip.samples[start..end].to_vec(), clip.sample_rate, name),
        offset: start,
    })
}

fn is_wav(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Parses, resamples, trims and packs every `.wav` in `in_dir` (sorted by file
/// name), writing `utt_NNNN.wav` files and `manifest.json` into `out_dir`.
///
/// Only an unreadable input directory or an unwritable output directory is
/// fatal; per-file failures are recorded in the manifest.
pub fn curate_directory(in_dir: &Path, out_dir: &Path, config: &CurationConfig) -> Result<CurationManifest, AudioError> {
    config.validate()?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| AudioError::Io { path, source }
    };
    let mut files: Vec<(String, std::path::PathBuf)> = fs::read_dir(in_dir)
        .map_err(io(in_dir))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| is_wav(p))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    files.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));

    let prepared: Vec<Result<Prepared, AudioError>> =
        files.par_iter().map(|(name, path)| prepare(path, name, config)).collect();

    let mut kept = Vec::new();
    let mut offsets = std::collections::HashMap::new();
    let mut dropped = Vec::new();
    let mut errors = Vec::new();
    for ((name, _), result) in files.iter().zip(prepared) {
        match result {
            Ok(Prepared::Kept { clip, offset }) => {
                offsets.insert(name.clone(), offset);
                kept.push(clip);
            }
            Ok(Prepared::Silent) => {
                info!("{name}: silent after trimming, dropped");
                dropped.push(name.clone());
            }
            Err(e) => {
                warn!("{name}: {e}");
                errors.push(FileError {
                    path: name.clone(),
                    error: e.to_string(),
                });
            }
        }
    }

    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let packed = concatenate_to_target(&kept, config)?;
    let mut outputs = Vec::with_capacity(packed.len());
    for (i, mut utt) in packed.into_iter().enumerate() {
        let file = format!("utt_{i:04}.wav");
        write_wav_pcm16(&utt.clip, &out_dir.join(&file))?;
        for span in &mut utt.sources {
            let off = offsets[&span.path];
            span.start_sample += off;
            span.end_sample += off;
        }
        outputs.push(CuratedOutput {
            output_path: file,
            duration_s: utt.clip.duration_s(),
            sources: utt.sources,
            flagged_remainder: utt.flagged_remainder,
        });
    }
    let manifest = CurationManifest {
        config: config.clone(),
        outputs,
        dropped,
        errors,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let manifest_path = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, json + "\n").map_err(io(&manifest_path))?;
    Ok(manifest)
}
