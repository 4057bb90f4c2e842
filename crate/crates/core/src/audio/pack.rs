use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError, CurationConfig};

/// Which samples of which input ended up in an output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub path: String,
    pub start_sample: usize,
    pub end_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedUtterance {
    pub clip: AudioClip,
    pub sources: Vec<SourceSpan>,
    /// Shorter than `min_duration_s`.
    pub flagged_remainder: bool,
}

struct Builder {
    samples: Vec<f32>,
    sources: Vec<SourceSpan>,
}

impl Builder {
    fn new() -> Self {
        Self {
            samples: Vec::new(),
            sources: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    fn push(&mut self, clip: &AudioClip) {
        self.samples.extend_from_slice(&clip.samples);
        self.sources.push(SourceSpan {
            path: clip.source.clone(),
            start_sample: 0,
            end_sample: clip.len(),
        });
    }

    fn finish(&mut self, rate: u32, min_s: f64) -> PackedUtterance {
        let samples = std::mem::take(&mut self.samples);
        let sources = std::mem::take(&mut self.sources);
        let clip = AudioClip::new(samples, rate, joined(&sources));
        PackedUtterance {
            flagged_remainder: clip.duration_s() < min_s,
            clip,
            sources,
        }
    }
}

fn joined(sources: &[SourceSpan]) -> String {
    sources.iter().map(|s| s.path.as_str()).collect::<Vec<_>>().join("+")
}

/// Greedy in-order packing into utterances of `[min, max]` seconds.
///
/// Clips are appended until the output reaches `min_duration_s`; a clip that
/// would push it past `max_duration_s` starts the next output instead. Clips
/// longer than the maximum pass through on their own. Any output shorter than
/// the minimum (typically the final remainder) is flagged. Every input sample
/// appears exactly once, in input order.
pub fn concatenate_to_target(clips: &[AudioClip], config: &CurationConfig) -> Result<Vec<PackedUtterance>, AudioError> {
    let rate = config.target_rate;
    if let Some(bad) = clips.iter().find(|c| c.sample_rate != rate) {
        return Err(AudioError::SampleRateMismatch {
            source_path: bad.source.clone(),
            found: bad.sample_rate,
            expected: rate,
        });
    }
    let min_s = config.min_duration_s;
    let max_s = config.max_duration_s;
    let secs = |n: usize| n as f64 / f64::from(rate);

    let mut out = Vec::new();
    let mut current = Builder::new();
    for clip in clips {
        if clip.duration_s() > max_s {
            if !current.is_empty() {
                out.push(current.finish(rate, min_s));
            }
            let mut solo = Builder::new();
            solo.push(clip);
            out.push(solo.finish(rate, min_s));
            continue;
        }
        if !current.is_empty() && secs(current.samples.len() + clip.len()) > max_s {
            out.push(current.finish(rate, min_s));
        }
        current.push(clip);
        if secs(current.samples.len()) >= min_s {
            out.push(current.finish(rate, min_s));
        }
    }
    if !current.is_empty() {
        out.push(current.finish(rate, min_s));
    }
    Ok(out)
}
