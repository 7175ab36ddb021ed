//! Mini-batch SGD training with per-epoch validation tracking.

use rayon::prelude::*;

use super::eval::{eval_loaded, eval_loaded_with_loss, probe_image_shape};
use super::images::load_image_tensor;
use super::manifest::DatasetManifest;
use super::split::SplitPlan;
use super::PipelineError;
use crate::nn::{
    backward, cross_entropy, forward, init_params, sgd_step, Gradients, ModelParams, ModelSpec,
    Tensor,
};
use crate::rng::{derive_seed, SplitMix64};

/// Seed-stream tags, so one experiment seed fans out into independent
/// initialization, shuffling, and split streams.
pub(crate) mod streams {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const HEAD_INIT: u64 = 3;
    pub const TARGET_SPLIT: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 10,
            epochs: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub test_accuracy: f64,
    /// `confusion[true][predicted]` over the test set.
    pub confusion: [[u32; 2]; 2],
    /// Epoch whose parameters were kept (highest validation accuracy);
    /// `None` when trained for zero epochs.
    pub best_epoch: Option<usize>,
    pub seed: u64,
    pub config: TrainConfig,
}

/// Train a freshly initialized model on the plan's training split.
///
/// Per epoch: a seeded shuffle of the train set, mean-gradient SGD over
/// batches, then a validation pass. Validation and test samples never enter
/// a gradient computation; the returned parameters are those of the best
/// validation epoch.
pub fn train(
    spec: &ModelSpec,
    manifest: &DatasetManifest,
    plan: &SplitPlan,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport), PipelineError> {
    train_with_observer(spec, manifest, plan, config, &mut |_| {})
}

/// As [`train`], reporting every batch's manifest indices to `observer`
/// right before they contribute gradients.
pub fn train_with_observer(
    spec: &ModelSpec,
    manifest: &DatasetManifest,
    plan: &SplitPlan,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&[usize]),
) -> Result<(ModelParams, TrainReport), PipelineError> {
    let params = init_params(spec, derive_seed(config.seed, streams::INIT));
    let lr_factors = vec![1.0; spec.layers().len()];
    fit(spec, params, manifest, plan, config, &lr_factors, observer)
}

/// Core loop shared by native training and transfer fine-tuning: starts from
/// the given parameters and applies `lr_factors[layer] * learning_rate` to
/// each parametric layer.
pub(crate) fn fit(
    spec: &ModelSpec,
    mut params: ModelParams,
    manifest: &DatasetManifest,
    plan: &SplitPlan,
    config: &TrainConfig,
    lr_factors: &[f32],
    observer: &mut dyn FnMut(&[usize]),
) -> Result<(ModelParams, TrainReport), PipelineError> {
    let probe: Vec<usize> = plan
        .train
        .iter()
        .chain(&plan.validation)
        .chain(&plan.test)
        .copied()
        .collect();
    let (height, width) = probe_image_shape(spec, manifest, &probe)?;
    let load_set = |indices: &[usize]| -> Result<Vec<(Tensor, usize)>, PipelineError> {
        indices
            .par_iter()
            .map(|&i| {
                let record = manifest
                    .records
                    .get(i)
                    .ok_or(PipelineError::IndexOutOfRange {
                        index: i,
                        len: manifest.records.len(),
                    })?;
                let tensor = load_image_tensor(&manifest.resolve(record), height, width)?;
                Ok((tensor, record.label.class_index()))
            })
            .collect()
    };
    let train_set = load_set(&plan.train)?;
    let val_set = load_set(&plan.validation)?;
    let test_set = load_set(&plan.test)?;
    if test_set.is_empty() || (config.epochs > 0 && (train_set.is_empty() || val_set.is_empty())) {
        return Err(PipelineError::EmptyIndexSet);
    }

    let mut shuffle_rng = SplitMix64::new(derive_seed(config.seed, streams::SHUFFLE));
    let batch_size = config.batch_size.max(1);

    let mut best_params = params.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = None;
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for batch in order.chunks(batch_size) {
            observer(&batch.iter().map(|&i| plan.train[i]).collect::<Vec<_>>());

            // Per-sample passes run in parallel; the reduction below walks
            // them in batch order so accumulation is bit-stable.
            let results = batch
                .par_iter()
                .map(|&i| {
                    let (input, label) = &train_set[i];
                    let (probs, cache) = forward(spec, &params, input)?;
                    let loss = cross_entropy(&probs, *label)?;
                    let grads = backward(spec, &params, &cache, *label)?;
                    let predicted = super::eval::argmax_class(&probs);
                    Ok((grads, loss, predicted == *label))
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;

            let mut batch_grads = Gradients::zeros_like(&params);
            let mut batch_loss = 0.0f64;
            for (grads, loss, was_correct) in &results {
                batch_grads.accumulate(grads);
                batch_loss += loss;
                correct += usize::from(*was_correct);
            }
            if !batch_loss.is_finite() {
                return Err(PipelineError::TrainingDiverged { epoch });
            }
            loss_sum += batch_loss;
            batch_grads.scale(1.0 / results.len() as f32);
            sgd_step_layerwise(&mut params, &batch_grads, config.learning_rate, lr_factors)?;
        }

        let (val_report, val_loss) = eval_loaded_with_loss(spec, &params, &val_set)?;
        let train_loss = loss_sum / train_set.len() as f64;
        epochs.push(EpochMetrics {
            epoch,
            train_loss,
            train_accuracy: correct as f64 / train_set.len() as f64,
            validation_accuracy: val_report.accuracy,
        });
        // Best validation accuracy wins; ties go to the epoch with the lower
        // validation loss.
        if val_report.accuracy > best_val
            || (val_report.accuracy == best_val && val_loss < best_val_loss)
        {
            best_val = val_report.accuracy;
            best_val_loss = val_loss;
            best_params = params.clone();
            best_epoch = Some(epoch);
        }
    }

    let test_report = eval_loaded(spec, &best_params, &test_set)?;
    let report = TrainReport {
        epochs,
        test_accuracy: test_report.accuracy,
        confusion: test_report.confusion,
        best_epoch,
        seed: config.seed,
        config: *config,
    };
    Ok((best_params, report))
}

/// SGD with a per-layer learning-rate factor (1.0 everywhere reduces to the
/// plain step).
fn sgd_step_layerwise(
    params: &mut ModelParams,
    grads: &Gradients,
    base_lr: f32,
    factors: &[f32],
) -> Result<(), PipelineError> {
    if factors.iter().all(|&f| f == 1.0) {
        sgd_step(params, grads, base_lr)?;
        return Ok(());
    }
    // Scale a copy of the gradients layer by layer, then take one plain step.
    let mut scaled = grads.clone();
    scaled.scale_per_layer(factors);
    sgd_step(params, &scaled, base_lr)?;
    Ok(())
}

/// Render the report as line-oriented text. Accuracies print as percentages
/// with two decimal places.
pub fn report_text(report: &TrainReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("seed: {}\n", report.seed));
    out.push_str(&format!(
        "config: lr={} batch={} epochs={}\n",
        report.config.learning_rate, report.config.batch_size, report.config.epochs
    ));
    for m in &report.epochs {
        out.push_str(&format!(
            "epoch {:3}  loss {:.6}  train {:6.2}%  val {:6.2}%\n",
            m.epoch,
            m.train_loss,
            100.0 * m.train_accuracy,
            100.0 * m.validation_accuracy
        ));
    }
    match report.best_epoch {
        Some(e) => out.push_str(&format!("best epoch: {e}\n")),
        None => out.push_str("best epoch: none (zero training epochs)\n"),
    }
    out.push_str(&format!(
        "test accuracy: {:.2}%\n",
        100.0 * report.test_accuracy
    ));
    out.push_str(&format!(
        "confusion: [[{}, {}], [{}, {}]]\n",
        report.confusion[0][0],
        report.confusion[0][1],
        report.confusion[1][0],
        report.confusion[1][1]
    ));
    out
}

/// Per-epoch metrics as CSV (`epoch,train_loss,train_accuracy,validation_accuracy`),
/// accuracies in percent with two decimals.
pub fn epochs_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,train_loss,train_accuracy,validation_accuracy\n");
    for m in &report.epochs {
        out.push_str(&format!(
            "{},{:.6},{:.2},{:.2}\n",
            m.epoch,
            m.train_loss,
            100.0 * m.train_accuracy,
            100.0 * m.validation_accuracy
        ));
    }
    out
}
