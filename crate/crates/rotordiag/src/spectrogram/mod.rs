//! Time-frequency analysis: Hann-windowed short-time Fourier transform and
//! rendering of the magnitude matrix as a fixed-size 3-channel image.

mod fft;
pub mod image;

pub use image::{colorize, read_image, write_image, SpecImage, COLOR_TABLE_LEN};

use rayon::prelude::*;
use thiserror::Error;

/// Analysis parameters of one spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectrogramParams {
    /// Samples per analysis window.
    pub window_len: usize,
    /// Time shift between consecutive windows, in samples.
    pub hop: usize,
    pub window_kind: WindowKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
}

impl SpectrogramParams {
    pub fn new(window_len: usize, hop: usize) -> Result<Self, SpectrogramError> {
        if window_len < 2 {
            return Err(SpectrogramError::WindowTooShort(window_len));
        }
        if hop < 1 || hop > window_len {
            return Err(SpectrogramError::InvalidHop { hop, window_len });
        }
        Ok(Self {
            window_len,
            hop,
            window_kind: WindowKind::Hann,
        })
    }

    /// Default analysis resolution: 1024-sample windows with 50% overlap.
    pub fn default_analysis() -> Self {
        Self::new(1024, 512).unwrap()
    }

    /// Number of analysis frames for a clip of `num_samples` samples.
    pub fn frame_count(&self, num_samples: usize) -> usize {
        if num_samples < self.window_len {
            0
        } else {
            (num_samples - self.window_len) / self.hop + 1
        }
    }

    /// Retained non-negative frequency bins: N/2 + 1.
    pub fn freq_bins(&self) -> usize {
        self.window_len / 2 + 1
    }
}

/// Magnitude time-frequency matrix, `frames` rows by `freq_bins` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    frames: usize,
    freq_bins: usize,
    pub params: SpectrogramParams,
    pub sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn magnitude(&self, frame: usize, bin: usize) -> f64 {
        self.magnitudes[frame * self.freq_bins + bin]
    }

    /// Center frequency of a bin in Hz.
    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate_hz as f64 / self.params.window_len as f64
    }
}

/// Dense row-major real matrix; the log-power image source.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Copy of the first `cols` columns of every row; for rendering only a
    /// low-frequency band of a level matrix.
    pub fn left_cols(&self, cols: usize) -> Matrix {
        let cols = cols.min(self.cols).max(1);
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            let start = r * self.cols;
            data.extend_from_slice(&self.data[start..start + cols]);
        }
        Matrix::from_rows(self.rows, cols, data)
    }
}

#[derive(Debug, Error)]
pub enum SpectrogramError {
    #[error("window length must be at least 2, got {0}")]
    WindowTooShort(usize),

    #[error("hop must satisfy 1 <= hop <= window length, got hop {hop} with window {window_len}")]
    InvalidHop { hop: usize, window_len: usize },

    #[error("clip has {num_samples} samples, shorter than one {window_len}-sample window")]
    ClipTooShort {
        num_samples: usize,
        window_len: usize,
    },

    #[error("image dimensions must be at least 8x8, got {height}x{width}")]
    DegenerateDimensions { height: usize, width: usize },

    #[error("malformed PPM: {0}")]
    MalformedPpm(String),

    #[error("unsupported PPM: {0}")]
    UnsupportedPpm(String),

    #[error("PPM pixel data truncated: expected {expected} bytes, found {found}")]
    TruncatedPpm { expected: usize, found: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Symmetric Hann window: W(n) = 0.5 * (1 - cos(2*pi*n / (N-1))), endpoints
/// exactly zero.
pub fn hann_window(n: usize) -> Result<Vec<f64>, SpectrogramError> {
    if n < 2 {
        return Err(SpectrogramError::WindowTooShort(n));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect())
}

/// Short-time Fourier transform.
///
/// Frame `t`, bin `k` holds `|sum_n W(n) * x(n + t*hop) * exp(-2*pi*i*k*n/N)|`
/// for `k = 0 ..= N/2`; frames are laid out until the window no longer fits,
/// giving `floor((len - N) / hop) + 1` frames.
pub fn stft(
    clip: &crate::audio::AudioClip,
    params: &SpectrogramParams,
) -> Result<Spectrogram, SpectrogramError> {
    let n = params.window_len;
    if clip.samples.len() < n {
        return Err(SpectrogramError::ClipTooShort {
            num_samples: clip.samples.len(),
            window_len: n,
        });
    }
    let window = hann_window(n)?;
    let frames = params.frame_count(clip.samples.len());
    let bins = params.freq_bins();

    // Frames are independent; compute them in parallel and assemble in frame
    // order so the result does not depend on scheduling.
    let rows: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let start = t * params.hop;
            let frame: Vec<f64> = (0..n)
                .map(|i| window[i] * clip.samples[start + i] as f64)
                .collect();
            let spectrum = fft::dft_real(&frame);
            spectrum[..bins].iter().map(|c| c.magnitude()).collect()
        })
        .collect();

    let mut magnitudes = Vec::with_capacity(frames * bins);
    for row in rows {
        magnitudes.extend_from_slice(&row);
    }

    Ok(Spectrogram {
        magnitudes,
        frames,
        freq_bins: bins,
        params: *params,
        sample_rate_hz: clip.sample_rate_hz,
    })
}

/// Default level floor for log-power rendering, in dB.
pub const DEFAULT_FLOOR_DB: f64 = -80.0;

/// Magnitudes to clamped decibels: `max(floor_db, 20*log10(m + 1e-10))`.
pub fn log_power(spec: &Spectrogram, floor_db: f64) -> Matrix {
    debug_assert!(floor_db < 0.0, "floor_db is expected to be negative");
    let data = spec
        .magnitudes
        .iter()
        .map(|&m| floor_db.max(20.0 * (m + 1e-10).log10()))
        .collect();
    Matrix::from_rows(spec.frames, spec.freq_bins, data)
}
