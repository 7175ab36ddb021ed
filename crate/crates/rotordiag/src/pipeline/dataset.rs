//! Synthetic dataset builder: renders labeled spectrogram images for one
//! rotor preset, balanced over thrust levels and damage configurations.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::{
    save_manifest, DatasetManifest, Label, PropellerConfig, SampleRecord, Thrust,
};
use super::PipelineError;
use crate::audio::{synth_rotor_audio, QuadPreset, RotorSynthSpec};
use crate::rng::{derive_seed, SplitMix64};
use crate::spectrogram::{colorize, log_power, stft, write_image, SpectrogramParams};

/// Audio and image geometry of one dataset. Every image in a dataset shares
/// these, so classifier input shapes are constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetLayout {
    pub sample_rate_hz: u32,
    pub sample_duration_s: f64,
    pub window_len: usize,
    pub hop: usize,
    pub floor_db: f64,
    /// Keep only this many low-frequency bins when rendering; `None` renders
    /// the full band. Rotor signatures live in the first few dozen bins, and
    /// cropping before the nearest-neighbor resize keeps each spectral line
    /// on its own stable image row.
    pub render_freq_bins: Option<usize>,
    pub image_height: usize,
    pub image_width: usize,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::audio::DEFAULT_SAMPLE_RATE,
            sample_duration_s: crate::audio::DEFAULT_SEGMENT_SECONDS,
            window_len: 1024,
            hop: 512,
            floor_db: crate::spectrogram::DEFAULT_FLOOR_DB,
            render_freq_bins: Some(64),
            image_height: 64,
            image_width: 64,
        }
    }
}

/// Smallest supported per-class sample count.
pub const MIN_PER_CLASS: usize = 10;

/// Generate `per_class` healthy and `per_class` damaged spectrogram images
/// for one preset under `out_dir`, and write `manifest.csv` alongside them.
///
/// Samples cycle uniformly through the three thrust levels; damaged samples
/// also alternate between the two damage configurations. Each sample draws
/// its own seed from `dataset_seed`, so the whole dataset is a pure function
/// of (preset, per_class, dataset_seed, layout).
pub fn build_synthetic_dataset(
    preset: &QuadPreset,
    per_class: usize,
    out_dir: &Path,
    dataset_seed: u64,
    layout: &DatasetLayout,
) -> Result<DatasetManifest, PipelineError> {
    if per_class < MIN_PER_CLASS {
        return Err(PipelineError::PerClassTooSmall {
            minimum: MIN_PER_CLASS,
            given: per_class,
        });
    }
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;

    let mut jobs = Vec::with_capacity(2 * per_class);
    for label in Label::ALL {
        for i in 0..per_class {
            jobs.push(plan_sample(preset, label, i, dataset_seed));
        }
    }

    let params = SpectrogramParams::new(layout.window_len, layout.hop)?;
    jobs.par_iter()
        .map(|job| render_sample(job, out_dir, layout, &params))
        .collect::<Result<Vec<_>, _>>()?;

    let records = jobs.into_iter().map(|j| j.record).collect();
    let manifest = DatasetManifest {
        records,
        root: out_dir.to_path_buf(),
    };
    save_manifest(&manifest, &out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

struct SampleJob {
    record: SampleRecord,
    spec: RotorSynthSpec,
}

fn plan_sample(preset: &QuadPreset, label: Label, index: usize, dataset_seed: u64) -> SampleJob {
    // Thrust cycles with period 3 and damage config with period 2, so all
    // six damaged cells repeat every six samples.
    let (config, thrust) = match label {
        Label::Unbroken => (PropellerConfig::Config1, Thrust::ALL[index % 3]),
        Label::Broken => {
            let config = if index % 2 == 0 {
                PropellerConfig::Config2
            } else {
                PropellerConfig::Config3
            };
            (config, Thrust::ALL[index % 3])
        }
    };

    // One independent stream per sample, identified by quadrotor, class,
    // and index.
    let tag = fnv1a(preset.name.as_bytes())
        ^ (label.class_index() as u64).wrapping_mul(0x10001)
        ^ ((index as u64) << 20);
    let sample_seed = derive_seed(dataset_seed, tag);
    let mut sample_rng = SplitMix64::new(sample_seed);

    // Motor speed varies between recordings of the same scenario.
    let jitter = 1.0 + preset.rate_jitter * (2.0 * sample_rng.next_f64() - 1.0);
    let damage = match config {
        PropellerConfig::Config1 => None,
        PropellerConfig::Config2 => Some(preset.config2),
        PropellerConfig::Config3 => Some(preset.config3),
    };

    let mut spec = preset.base.clone();
    spec.shaft_rate_hz *= thrust.rate_multiplier() * jitter;
    if let Some(d) = damage {
        spec.imbalance_depth = d.imbalance_depth;
        spec.subharmonic_gain = d.subharmonic_gain;
    }
    spec.seed = sample_rng.next_u64();

    let file = format!("{}_{}_{index:03}.ppm", preset.name, label);
    SampleJob {
        record: SampleRecord {
            image_path: PathBuf::from(file),
            label,
            quadrotor_id: preset.name.clone(),
            propeller_set: config,
            thrust,
        },
        spec,
    }
}

fn render_sample(
    job: &SampleJob,
    out_dir: &Path,
    layout: &DatasetLayout,
    params: &SpectrogramParams,
) -> Result<(), PipelineError> {
    let clip = synth_rotor_audio(&job.spec, layout.sample_duration_s, layout.sample_rate_hz)?;
    let spec = stft(&clip, params)?;
    let levels = log_power(&spec, layout.floor_db);
    let levels = match layout.render_freq_bins {
        Some(bins) => levels.left_cols(bins),
        None => levels,
    };
    let image = colorize(&levels, layout.image_height, layout.image_width)?;
    write_image(&image, &out_dir.join(&job.record.image_path))?;
    Ok(())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}
