use super::{AudioClip, CurationConfig};

/// Samples per analysis frame, at least 1.
pub fn frame_len(sample_rate: u32, frame_ms: f64) -> usize {
    ((frame_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
}

/// `[start, end)` after dropping leading and trailing frames whose RMS is under
/// the threshold. Frames are non-overlapping from sample 0; the last one may be
/// short. Returns `(0, 0)` when every frame is silent.
pub fn silence_bounds(samples: &[f32], sample_rate: u32, config: &CurationConfig) -> (usize, usize) {
    let flen = frame_len(sample_rate, config.frame_ms);
    let threshold = 10f64.powf(config.silence_threshold_db / 20.0);
    let loud = |chunk: &[f32]| {
        let energy: f64 = chunk.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
        (energy / chunk.len() as f64).sqrt() >= threshold
    };
    let frames: Vec<&[f32]> = samples.chunks(flen).collect();
    let Some(first) = frames.iter().position(|f| loud(f)) else {
        return (0, 0);
    };
    let last = frames.iter().rposition(|f| loud(f)).unwrap_or(first);
    let start = first * flen;
    let end = (last * flen + frames[last].len()).min(samples.len());
    (start, end)
}

pub fn trim_silence(clip: &AudioClip, config: &CurationConfig) -> AudioClip {
    let (start, end) = silence_bounds(&clip.samples, clip.sample_rate, config);
    AudioClip::new(clip.samples[start..end].to_vec(), clip.sample_rate, clip.source.clone())
}
