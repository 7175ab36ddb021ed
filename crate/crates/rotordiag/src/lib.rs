//! Propeller fault diagnosis from rotor audio.
//!
//! The pipeline: synthesize (or read) rotor audio, convert it to a
//! Hann-windowed spectrogram, render the spectrogram as a small 3-channel
//! image, and classify healthy vs. damaged propellers with a compact CNN
//! trained from scratch. A transfer step adapts a trained model to a second
//! rotor type from a handful of labeled samples.
//!
//! Everything is seeded and deterministic: the same seeds reproduce the same
//! audio, images, checkpoints, and reports byte for byte.

pub mod audio;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod spectrogram;
