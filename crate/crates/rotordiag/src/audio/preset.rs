//! Named rotor presets and the plain-text preset file format.
//!
//! Two built-in quadrotors, `quadA` and `quadB`, differ in shaft rate,
//! harmonic profile and noise floor, so a classifier trained on one does not
//! directly fit the other. Each preset carries the healthy baseline spec plus
//! the damage parameters applied for the two damaged-propeller test
//! configurations.

use std::fmt::Write as _;
use std::path::Path;

use super::{AudioError, RotorSynthSpec};

/// Damage signature of one damaged-propeller configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageParams {
    pub imbalance_depth: f64,
    pub subharmonic_gain: f64,
}

/// A named rotor type: healthy baseline plus its two damage configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadPreset {
    pub name: String,
    /// Healthy baseline; `imbalance_depth` and `subharmonic_gain` are zero.
    pub base: RotorSynthSpec,
    /// Damage parameters for the severely shortened propeller (config2).
    pub config2: DamageParams,
    /// Damage parameters for the mildly shortened propeller (config3).
    pub config3: DamageParams,
    /// Relative shaft-rate spread between recordings of the same scenario,
    /// modeling motor speed variation. A per-sample factor in
    /// [1 - jitter, 1 + jitter] multiplies the shaft rate.
    pub rate_jitter: f64,
}

impl QuadPreset {
    /// Wrap a custom baseline spec in the standard damage recipe.
    pub fn from_base(name: &str, base: RotorSynthSpec) -> Self {
        Self {
            name: name.to_string(),
            base,
            config2: DamageParams {
                imbalance_depth: 0.45,
                subharmonic_gain: 0.35,
            },
            config3: DamageParams {
                imbalance_depth: 0.25,
                subharmonic_gain: 0.18,
            },
            rate_jitter: 0.01,
        }
    }
}

/// First quadrotor: 55 rev/s two-blade rotor.
pub fn quad_a() -> QuadPreset {
    QuadPreset::from_base(
        "quadA",
        RotorSynthSpec {
            shaft_rate_hz: 55.0,
            blade_count: 2,
            harmonic_amplitudes: vec![
                1.0, 0.70, 0.52, 0.40, 0.32, 0.26, 0.21, 0.17, 0.14, 0.11, 0.09, 0.07,
            ],
            imbalance_depth: 0.0,
            subharmonic_gain: 0.0,
            noise_level: 0.04,
            seed: 0,
        },
    )
}

/// Second quadrotor: 85 rev/s two-blade rotor with a flat harmonic profile
/// that spreads its lines across a much wider band than the first rotor's.
pub fn quad_b() -> QuadPreset {
    QuadPreset::from_base(
        "quadB",
        RotorSynthSpec {
            shaft_rate_hz: 85.0,
            blade_count: 2,
            harmonic_amplitudes: vec![
                1.0, 0.80, 0.75, 0.70, 0.60, 0.55, 0.50, 0.45, 0.42, 0.40, 0.38, 0.35, 0.32,
            ],
            imbalance_depth: 0.0,
            subharmonic_gain: 0.0,
            noise_level: 0.05,
            seed: 0,
        },
    )
}

/// Look up a built-in preset; `None` for unknown names.
pub fn preset_by_name(name: &str) -> Option<QuadPreset> {
    match name {
        "quadA" => Some(quad_a()),
        "quadB" => Some(quad_b()),
        _ => None,
    }
}

/// Parse the plain-text `key=value` preset format.
///
/// Recognized keys: `shaft_rate_hz`, `blade_count`, `harmonics`
/// (comma-separated amplitudes), `imbalance_depth`, `subharmonic_gain`,
/// `noise_level`, `seed`. Blank lines and `#` comments are ignored; every
/// key is required exactly once.
pub fn parse_preset(text: &str) -> Result<RotorSynthSpec, AudioError> {
    let bad = |msg: String| AudioError::MalformedPreset(msg);
    let mut shaft_rate_hz = None;
    let mut blade_count = None;
    let mut harmonics = None;
    let mut imbalance_depth = None;
    let mut subharmonic_gain = None;
    let mut noise_level = None;
    let mut seed = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |slot: &mut Option<f64>| -> Result<(), AudioError> {
            if slot.is_some() {
                return Err(bad(format!("duplicate key {key}")));
            }
            *slot = Some(
                value
                    .parse::<f64>()
                    .map_err(|_| bad(format!("invalid number for {key}: {value}")))?,
            );
            Ok(())
        };
        match key {
            "shaft_rate_hz" => parse_f64(&mut shaft_rate_hz)?,
            "imbalance_depth" => parse_f64(&mut imbalance_depth)?,
            "subharmonic_gain" => parse_f64(&mut subharmonic_gain)?,
            "noise_level" => parse_f64(&mut noise_level)?,
            "blade_count" => {
                blade_count = Some(
                    value
                        .parse::<u32>()
                        .map_err(|_| bad(format!("invalid blade_count: {value}")))?,
                );
            }
            "seed" => {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| bad(format!("invalid seed: {value}")))?,
                );
            }
            "harmonics" => {
                let amps: Result<Vec<f64>, _> =
                    value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                harmonics =
                    Some(amps.map_err(|_| bad(format!("invalid harmonics list: {value}")))?);
            }
            other => return Err(bad(format!("unknown key {other}"))),
        }
    }

    let require = |name: &str| bad(format!("missing key {name}"));
    Ok(RotorSynthSpec {
        shaft_rate_hz: shaft_rate_hz.ok_or_else(|| require("shaft_rate_hz"))?,
        blade_count: blade_count.ok_or_else(|| require("blade_count"))?,
        harmonic_amplitudes: harmonics.ok_or_else(|| require("harmonics"))?,
        imbalance_depth: imbalance_depth.ok_or_else(|| require("imbalance_depth"))?,
        subharmonic_gain: subharmonic_gain.ok_or_else(|| require("subharmonic_gain"))?,
        noise_level: noise_level.ok_or_else(|| require("noise_level"))?,
        seed: seed.ok_or_else(|| require("seed"))?,
    })
}

/// Serialize a spec in the preset file format; `parse_preset` inverts it.
pub fn write_preset(spec: &RotorSynthSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "shaft_rate_hz={}", spec.shaft_rate_hz);
    let _ = writeln!(out, "blade_count={}", spec.blade_count);
    let harmonics: Vec<String> = spec
        .harmonic_amplitudes
        .iter()
        .map(|a| a.to_string())
        .collect();
    let _ = writeln!(out, "harmonics={}", harmonics.join(","));
    let _ = writeln!(out, "imbalance_depth={}", spec.imbalance_depth);
    let _ = writeln!(out, "subharmonic_gain={}", spec.subharmonic_gain);
    let _ = writeln!(out, "noise_level={}", spec.noise_level);
    let _ = writeln!(out, "seed={}", spec.seed);
    out
}

/// Read a preset file from disk.
pub fn read_preset_file(path: &Path) -> Result<RotorSynthSpec, AudioError> {
    let text = std::fs::read_to_string(path).map_err(|e| AudioError::io(path, e))?;
    parse_preset(&text)
}
