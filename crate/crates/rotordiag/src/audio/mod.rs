//! Rotor audio: PCM file I/O, fixed-length segmentation, and a deterministic
//! synthesizer that stands in for microphone recordings of healthy and
//! damaged propellers.

mod preset;
mod synth;
mod wav;

pub use preset::{
    parse_preset, preset_by_name, quad_a, quad_b, read_preset_file, write_preset, DamageParams,
    QuadPreset,
};
pub use synth::{segment_clip, synth_rotor_audio};
pub use wav::{read_wav, write_wav};

use std::path::PathBuf;
use thiserror::Error;

/// Default sample rate for synthesis and analysis, in Hz.
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;

/// Default sample duration in seconds: each labeled data point is one
/// six-second recording.
pub const DEFAULT_SEGMENT_SECONDS: f64 = 6.0;

/// Mono audio signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    /// Amplitudes, nominally in [-1, 1].
    pub samples: Vec<f32>,
    /// Samples per second; always positive.
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        assert!(sample_rate_hz > 0, "sample rate must be positive");
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Parameters of one synthesized rotor recording.
///
/// A healthy rotor is exactly `imbalance_depth == 0.0 && subharmonic_gain == 0.0`;
/// either field nonzero models a damaged propeller, which adds a shaft-rate
/// tone and amplitude modulation of the blade-pass harmonics.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorSynthSpec {
    /// Rotor revolutions per second; must be positive.
    pub shaft_rate_hz: f64,
    /// Blades per propeller; the blade-pass fundamental is
    /// `shaft_rate_hz * blade_count`.
    pub blade_count: u32,
    /// Amplitude of each blade-pass harmonic; entry `k` drives frequency
    /// `(k + 1) * blade_pass_hz`.
    pub harmonic_amplitudes: Vec<f64>,
    /// Amplitude-modulation depth at the shaft rate, in [0, 1].
    pub imbalance_depth: f64,
    /// Amplitude of the added shaft-rate tone.
    pub subharmonic_gain: f64,
    /// RMS of the broadband Gaussian noise component.
    pub noise_level: f64,
    /// Seed for the noise stream; identical specs with identical seeds
    /// produce identical clips sample-for-sample.
    pub seed: u64,
}

impl RotorSynthSpec {
    pub fn is_healthy(&self) -> bool {
        self.imbalance_depth == 0.0 && self.subharmonic_gain == 0.0
    }

    /// Blade-pass fundamental frequency in Hz.
    pub fn blade_pass_hz(&self) -> f64 {
        self.shaft_rate_hz * self.blade_count as f64
    }

    /// Frequency of the highest synthesized harmonic in Hz.
    pub fn max_harmonic_hz(&self) -> f64 {
        self.blade_pass_hz() * self.harmonic_amplitudes.len() as f64
    }
}

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),

    #[error("unsupported codec: {0} (only 16-bit PCM is supported)")]
    UnsupportedCodec(String),

    #[error("synthesis would alias: highest harmonic {max_hz} Hz >= Nyquist {nyquist_hz} Hz")]
    Aliasing { max_hz: f64, nyquist_hz: f64 },

    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),

    #[error("segment length must be positive, got {0}")]
    NonPositiveSegment(f64),

    #[error("invalid synthesis parameter: {0}")]
    InvalidSpec(String),

    #[error("malformed preset file: {0}")]
    MalformedPreset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AudioError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        AudioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
