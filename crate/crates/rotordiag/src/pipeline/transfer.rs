//! Few-shot adaptation of a trained model to a second rotor type.
//!
//! The classification head (the last dense layer) is re-initialized from the
//! seed, then every layer fine-tunes on a handful of target samples: the new
//! head at the base learning rate, the retained feature layers at a tenth of
//! it. Zero fine-tuning epochs degrade to a pure no-op: the source model is
//! returned and scored unchanged.

use super::manifest::DatasetManifest;
use super::split::{split, SplitPlan};
use super::train::{fit, streams, TrainConfig, TrainReport};
use super::{eval, PipelineError};
use crate::nn::{init_params, ModelParams, ModelSpec};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    /// Learning rate, batch size, epoch count, and seed of the fine-tuning
    /// run.
    pub base: TrainConfig,
    /// Labeled target samples per class used for fine-tuning (5 and 10 are
    /// the canonical few-shot settings).
    pub n_train_per_class: usize,
    /// Target validation samples per class.
    pub val_per_class: usize,
    /// Learning-rate factor for the retained (non-head) layers.
    pub feature_lr_scale: f32,
}

impl TransferConfig {
    pub fn new(n_train_per_class: usize, base: TrainConfig) -> Self {
        Self {
            base,
            n_train_per_class,
            val_per_class: 15,
            feature_lr_scale: 0.1,
        }
    }

    /// The fine-tuning schedule used by the stock experiments: a hotter
    /// learning rate and many more epochs than native training, since the
    /// target set is tiny.
    pub fn recommended(n_train_per_class: usize, seed: u64) -> Self {
        Self::new(
            n_train_per_class,
            TrainConfig {
                learning_rate: 0.02,
                batch_size: 10,
                epochs: 150,
                seed,
            },
        )
    }
}

/// Adapt `(spec, source_params)` to the target manifest. Returns the adapted
/// parameters, the training report over the target test split, and the plan
/// that was used.
pub fn transfer(
    spec: &ModelSpec,
    source_params: &ModelParams,
    target: &DatasetManifest,
    config: &TransferConfig,
) -> Result<(ModelParams, TrainReport, SplitPlan), PipelineError> {
    let plan = split(
        target,
        derive_seed(config.base.seed, streams::TARGET_SPLIT),
        config.n_train_per_class,
        config.val_per_class,
    )?;

    if config.base.epochs == 0 {
        // No-op adaptation: score the source model as-is on the target test
        // split.
        let report = eval::evaluate(spec, source_params, target, &plan.test)?;
        let train_report = TrainReport {
            epochs: Vec::new(),
            test_accuracy: report.accuracy,
            confusion: report.confusion,
            best_epoch: None,
            seed: config.base.seed,
            config: config.base,
        };
        return Ok((source_params.clone(), train_report, plan));
    }

    let head = spec
        .head_index()
        .ok_or_else(|| crate::nn::NnError::InvalidSpec("model has no dense head".into()))?;

    // Fresh head, retained features.
    let mut params = source_params.clone();
    let fresh = init_params(spec, derive_seed(config.base.seed, streams::HEAD_INIT));
    params.entries_mut()[head] = fresh.entries()[head].clone();

    let lr_factors: Vec<f32> = spec
        .layers()
        .iter()
        .enumerate()
        .map(|(at, layer)| {
            if !layer.has_params() {
                1.0
            } else if at == head {
                1.0
            } else {
                config.feature_lr_scale
            }
        })
        .collect();

    let (adapted, report) = fit(
        spec,
        params,
        target,
        &plan,
        &config.base,
        &lr_factors,
        &mut |_| {},
    )?;
    Ok((adapted, report, plan))
}
