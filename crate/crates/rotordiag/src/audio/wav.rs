//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.
//!
//! Reading accepts mono or stereo 16-bit PCM and averages stereo down to
//! mono; writing always emits canonical mono 16-bit little-endian PCM.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioClip, AudioError};

/// Scale between 16-bit integer samples and float amplitudes: integer `i`
/// decodes to `i / 32768`, so the decoded range is [-1, 1).
const PCM_SCALE: f32 = 32768.0;

/// Read a 16-bit PCM WAV file into a mono [`AudioClip`].
///
/// Stereo frames are averaged channel-wise. Missing files, malformed
/// containers and non-PCM-16 encodings are reported as distinct errors.
pub fn read_wav(path: &Path) -> Result<AudioClip, AudioError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(AudioError::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(AudioError::io(path, e)),
    };
    decode_wav(&bytes)
}

fn malformed(msg: impl Into<String>) -> AudioError {
    AudioError::MalformedContainer(msg.into())
}

fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(malformed("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE form type"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (tag, channels, rate, bits)
    let mut data: Option<&[u8]> = None;

    // Walk the chunk list; unknown chunks are skipped.
    let mut offset = 12;
    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap()) as usize;
        let body_start = offset + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| malformed("chunk size overflow"))?;
        if body_end > bytes.len() {
            return Err(malformed(format!(
                "chunk {} overruns file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                let tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunk bodies are word-aligned; odd sizes carry a pad byte.
        offset = body_end + (size & 1);
    }

    let (tag, channels, rate, bits) = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;

    if tag != 1 {
        return Err(AudioError::UnsupportedCodec(format!("format tag {tag}")));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedCodec(format!("{bits}-bit samples")));
    }
    if !(channels == 1 || channels == 2) {
        return Err(AudioError::UnsupportedCodec(format!("{channels} channels")));
    }
    if rate == 0 {
        return Err(malformed("zero sample rate"));
    }
    let frame_bytes = 2 * channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(malformed("data chunk not a whole number of frames"));
    }

    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0f32;
        for c in 0..channels as usize {
            let at = f * frame_bytes + 2 * c;
            let v = i16::from_le_bytes(data[at..at + 2].try_into().unwrap());
            acc += v as f32 / PCM_SCALE;
        }
        samples.push(acc / channels as f32);
    }

    Ok(AudioClip::new(samples, rate))
}

/// Write a clip as canonical mono 16-bit PCM.
///
/// Amplitudes are clamped to [-1, 1] and rounded to the nearest 16-bit code,
/// so a re-read differs from the input by at most 1/32768 per sample.
pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<(), AudioError> {
    let mut out = Vec::with_capacity(44 + clip.samples.len() * 2);
    let data_len = (clip.samples.len() * 2) as u32;
    let rate = clip.sample_rate_hz;

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }

    let mut file = fs::File::create(path).map_err(|e| AudioError::io(path, e))?;
    file.write_all(&out).map_err(|e| AudioError::io(path, e))?;
    Ok(())
}

fn quantize(sample: f32) -> i16 {
    let clamped = sample.clamp(-1.0, 1.0);
    let scaled = (clamped * PCM_SCALE).round();
    scaled.clamp(i16::MIN as f32, i16::MAX as f32) as i16
}
