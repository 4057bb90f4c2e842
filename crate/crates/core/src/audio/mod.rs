//! Recording curation: WAV decode/encode, resampling, edge-silence trimming and
//! order-preserving packing of short clips into 10–15 s utterances.

mod curate;
mod pack;
mod resample;
mod trim;
mod wav;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curate::{curate_directory, CuratedOutput, CurationManifest, FileError, MANIFEST_FILE};
pub use pack::{concatenate_to_target, PackedUtterance, SourceSpan};
pub use resample::{resample, KAISER_BETA, SINC_HALF_WIDTH};
pub use trim::{frame_len, silence_bounds, trim_silence};
pub use wav::{encode_wav_f32, encode_wav_pcm16, parse_wav, quantize_pcm16, read_wav, write_wav_pcm16};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: codec id {codec:#06x}, {bits} bits per sample")]
    UnsupportedEncoding { codec: u16, bits: u16 },
    #[error("no data chunk found")]
    MissingDataChunk,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("clip {source_path:?} is at {found} Hz, expected {expected} Hz")]
    SampleRateMismatch {
        source_path: String,
        found: u32,
        expected: u32,
    },
    #[error("invalid curation config: {0}")]
    InvalidConfig(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono samples in [−1, 1] at `sample_rate` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    /// Where the audio came from, for provenance in manifests.
    pub source: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source: impl Into<String>) -> Self {
        Self {
            samples,
            sample_rate,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub target_rate: u32,
    /// Frame RMS below this (dBFS, full scale 1.0) counts as silence.
    pub silence_threshold_db: f64,
    pub frame_ms: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            target_rate: 16_000,
            silence_threshold_db: -40.0,
            frame_ms: 20.0,
            min_duration_s: 10.0,
            max_duration_s: 15.0,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        if self.target_rate == 0 {
            return Err(AudioError::InvalidConfig("target_rate must be > 0".into()));
        }
        if !(self.min_duration_s > 0.0 && self.min_duration_s < self.max_duration_s) {
            return Err(AudioError::InvalidConfig(format!(
                "need 0 < min_duration_s < max_duration_s, got {} and {}",
                self.min_duration_s, self.max_duration_s
            )));
        }
        if !(self.frame_ms > 0.0) {
            return Err(AudioError::InvalidConfig("frame_ms must be > 0".into()));
        }
        if !(self.silence_threshold_db < 0.0) {
            return Err(AudioError::InvalidConfig("silence_threshold_db must be < 0".into()));
        }
        Ok(())
    }
}
