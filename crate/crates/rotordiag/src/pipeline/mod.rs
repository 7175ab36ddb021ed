//! Experiment pipeline: dataset synthesis and manifests, the split protocol,
//! training, evaluation, and few-shot transfer between rotor types.

mod dataset;
mod eval;
mod images;
mod manifest;
mod split;
mod train;
mod transfer;

pub use dataset::{build_synthetic_dataset, DatasetLayout, MIN_PER_CLASS};
pub use eval::{cross_evaluate, evaluate, EvalReport};
pub use manifest::{
    load_manifest, save_manifest, DatasetManifest, Label, PropellerConfig, SampleRecord, Thrust,
};
pub use split::{split, SplitPlan};
pub use train::{
    epochs_csv, report_text, train, train_with_observer, EpochMetrics, TrainConfig, TrainReport,
};
pub use transfer::{transfer, TransferConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("manifest parse error at line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    #[error("{found} samples of class {class} but {needed} required")]
    InsufficientSamples {
        class: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("per-class count must be at least {minimum}, got {given}")]
    PerClassTooSmall { minimum: usize, given: usize },

    #[error("evaluation index set is empty")]
    EmptyIndexSet,

    #[error("evaluation index {index} out of range for {len} records")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("image {path} is {height}x{width}, expected {expected_h}x{expected_w}")]
    ImageSizeMismatch {
        path: std::path::PathBuf,
        height: usize,
        width: usize,
        expected_h: usize,
        expected_w: usize,
    },

    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),

    #[error(transparent)]
    Spectrogram(#[from] crate::spectrogram::SpectrogramError),

    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),

    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
