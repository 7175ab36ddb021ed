//! Deterministic rotor-acoustics synthesizer.
//!
//! The signal model: blade-pass harmonics, amplitude-modulated at the shaft
//! rate when the rotor is imbalanced, plus an added shaft-rate tone for a
//! damaged blade and seeded broadband noise:
//!
//! ```text
//! s(t) = [ sum_k A_k sin(2*pi*(k+1)*f_bp*t) ] * [ 1 + d*sin(2*pi*f_s*t) ]
//!        + g_sub*sin(2*pi*f_s*t) + sigma*g(t)
//! ```
//!
//! where `f_s` is the shaft rate, `f_bp = f_s * blade_count`, and `g` is a
//! seeded standard Gaussian stream. The result is scaled down if its peak
//! exceeds 0.99; it is never amplified.

use super::{AudioClip, AudioError, RotorSynthSpec};
use crate::rng::GaussianSource;

const PEAK_LIMIT: f64 = 0.99;

/// Synthesize one rotor recording. Pure in all inputs: identical
/// (spec, duration, rate) produce byte-identical clips.
pub fn synth_rotor_audio(
    spec: &RotorSynthSpec,
    duration_s: f64,
    sample_rate_hz: u32,
) -> Result<AudioClip, AudioError> {
    if !(duration_s > 0.0) {
        return Err(AudioError::NonPositiveDuration(duration_s));
    }
    if !(spec.shaft_rate_hz > 0.0) {
        return Err(AudioError::InvalidSpec(format!(
            "shaft_rate_hz must be positive, got {}",
            spec.shaft_rate_hz
        )));
    }
    if spec.blade_count < 2 {
        return Err(AudioError::InvalidSpec(format!(
            "blade_count must be at least 2, got {}",
            spec.blade_count
        )));
    }
    if spec.harmonic_amplitudes.iter().any(|a| *a < 0.0)
        || spec.imbalance_depth < 0.0
        || spec.imbalance_depth > 1.0
        || spec.subharmonic_gain < 0.0
        || spec.noise_level < 0.0
    {
        return Err(AudioError::InvalidSpec(
            "amplitudes must be non-negative and imbalance_depth within [0, 1]".into(),
        ));
    }
    let nyquist_hz = sample_rate_hz as f64 / 2.0;
    // Imbalance modulation pushes sidebands one shaft rate above the top
    // harmonic; account for them when present.
    let sideband = if spec.imbalance_depth > 0.0 {
        spec.shaft_rate_hz
    } else {
        0.0
    };
    let max_hz = (spec.max_harmonic_hz() + sideband).max(spec.shaft_rate_hz);
    if max_hz >= nyquist_hz {
        return Err(AudioError::Aliasing { max_hz, nyquist_hz });
    }

    let num_samples = (duration_s * sample_rate_hz as f64).floor() as usize;
    let dt = 1.0 / sample_rate_hz as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let blade_pass = spec.blade_pass_hz();

    let mut noise = GaussianSource::new(spec.seed);
    let mut samples = vec![0.0f64; num_samples];
    let mut peak = 0.0f64;
    for (n, out) in samples.iter_mut().enumerate() {
        let t = n as f64 * dt;
        let mut tonal = 0.0;
        for (k, &amp) in spec.harmonic_amplitudes.iter().enumerate() {
            tonal += amp * (two_pi * (k as f64 + 1.0) * blade_pass * t).sin();
        }
        let shaft = (two_pi * spec.shaft_rate_hz * t).sin();
        let mut v = tonal * (1.0 + spec.imbalance_depth * shaft);
        v += spec.subharmonic_gain * shaft;
        if spec.noise_level > 0.0 {
            v += spec.noise_level * noise.next();
        }
        *out = v;
        peak = peak.max(v.abs());
    }

    let scale = if peak > PEAK_LIMIT {
        PEAK_LIMIT / peak
    } else {
        1.0
    };
    let samples = samples.into_iter().map(|v| (v * scale) as f32).collect();
    Ok(AudioClip::new(samples, sample_rate_hz))
}

/// Cut a clip into consecutive non-overlapping segments of `segment_s`
/// seconds. The trailing remainder is dropped; a clip shorter than one
/// segment yields an empty sequence.
pub fn segment_clip(clip: &AudioClip, segment_s: f64) -> Result<Vec<AudioClip>, AudioError> {
    if !(segment_s > 0.0) {
        return Err(AudioError::NonPositiveSegment(segment_s));
    }
    let seg_len = (segment_s * clip.sample_rate_hz as f64).floor() as usize;
    if seg_len == 0 {
        return Err(AudioError::NonPositiveSegment(segment_s));
    }
    Ok(clip
        .samples
        .chunks_exact(seg_len)
        .map(|chunk| AudioClip::new(chunk.to_vec(), clip.sample_rate_hz))
        .collect())
}
