use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Format {
    codec: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn parse_fmt(body: &[u8]) -> Result<Format, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedContainer(format!("fmt chunk is {} bytes", body.len())));
    }
    let mut codec = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if codec == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(AudioError::MalformedContainer("truncated WAVE_FORMAT_EXTENSIBLE".into()));
        }
        // first two bytes of the sub-format GUID carry the real codec id
        codec = u16_at(body, 24);
    }
    if channels == 0 || sample_rate == 0 {
        return Err(AudioError::MalformedContainer(format!(
            "channels={channels}, sample_rate={sample_rate}"
        )));
    }
    Ok(Format {
        codec,
        channels,
        sample_rate,
        bits,
    })
}

/// Decodes a RIFF/WAVE buffer: 16-bit PCM (scaled by 1/32768) or 32-bit IEEE
/// float (clamped to [−1, 1]). Multi-channel audio is averaged to mono.
pub fn parse_wav(bytes: &[u8], source: &str) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedContainer("missing RIFF/WAVE signature".into()));
    }
    let mut fmt: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        // Writers that stream often leave an oversized length; take what exists.
        let end = start.saturating_add(size).min(bytes.len());
        let body = &bytes[start..end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                if fmt.is_none() {
                    return Err(AudioError::MalformedContainer("data chunk precedes fmt chunk".into()));
                }
                data = Some(body);
                break;
            }
            _ => {}
        }
        pos = start.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = fmt.ok_or_else(|| AudioError::MalformedContainer("no fmt chunk".into()))?;
    let data = data.ok_or(AudioError::MissingDataChunk)?;

    let width = match (fmt.codec, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (codec, bits) => return Err(AudioError::UnsupportedEncoding { codec, bits }),
    };
    let channels = usize::from(fmt.channels);
    let frame = width * channels;
    let frames = data.len() / frame;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0f64;
        for c in 0..channels {
            let off = f * frame + c * width;
            let v = if width == 2 {
                f64::from(i16::from_le_bytes([data[off], data[off + 1]])) / 32768.0
            } else {
                let x = f32::from_le_bytes(data[off..off + 4].try_into().unwrap());
                if !x.is_finite() {
                    return Err(AudioError::NonFiniteSample(f));
                }
                f64::from(x.clamp(-1.0, 1.0))
            };
            acc += v;
        }
        samples.push((acc / channels as f64) as f32);
    }
    Ok(AudioClip::new(samples, fmt.sample_rate, source))
}

pub fn read_wav(path: &Path) -> Result<AudioClip, AudioError> {
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_wav(&bytes, &path.to_string_lossy())
}

/// Round half away from zero at 32768 steps per unit, clipped to i16.
pub fn quantize_pcm16(x: f32) -> i16 {
    let scaled = (f64::from(x) * 32768.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

fn header(codec: u16, channels: u16, rate: u32, bits: u16, data_len: usize) -> Vec<u8> {
    let block_align = channels * (bits / 8);
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&codec.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    out
}

/// Mono 16-bit PCM WAV bytes.
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let mut out = header(FORMAT_PCM, 1, clip.sample_rate, 16, clip.samples.len() * 2);
    for &s in &clip.samples {
        out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
    }
    out
}

/// Mono 32-bit float WAV bytes.
pub fn encode_wav_f32(clip: &AudioClip) -> Vec<u8> {
    let mut out = header(FORMAT_IEEE_FLOAT, 1, clip.sample_rate, 32, clip.samples.len() * 4);
    for &s in &clip.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_wav_pcm16(clip: &AudioClip, path: &Path) -> Result<(), AudioError> {
    std::fs::write(path, encode_wav_pcm16(clip)).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })
}
