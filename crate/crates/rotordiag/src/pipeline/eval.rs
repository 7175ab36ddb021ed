//! Model evaluation: accuracy and confusion counts over an index set.

use rayon::prelude::*;

use super::images::load_image_tensor;
use super::manifest::DatasetManifest;
use super::PipelineError;
use crate::nn::{forward, ModelParams, ModelSpec, Tensor};

/// Accuracy and 2x2 confusion counts; `confusion[true][predicted]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: [[u32; 2]; 2],
    pub count: usize,
}

impl EvalReport {
    fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        let mut confusion = [[0u32; 2]; 2];
        for &(truth, predicted) in pairs {
            confusion[truth][predicted] += 1;
        }
        let correct = confusion[0][0] + confusion[1][1];
        EvalReport {
            accuracy: correct as f64 / pairs.len() as f64,
            confusion,
            count: pairs.len(),
        }
    }
}

/// Predicted class: argmax of the class probabilities, ties to the lower
/// class index.
pub(crate) fn argmax_class(probs: &Tensor) -> usize {
    let mut best = 0;
    for (k, &p) in probs.data().iter().enumerate() {
        if p > probs.data()[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn eval_loaded(
    spec: &ModelSpec,
    params: &ModelParams,
    samples: &[(Tensor, usize)],
) -> Result<EvalReport, PipelineError> {
    Ok(eval_loaded_with_loss(spec, params, samples)?.0)
}

/// Evaluation plus the mean cross-entropy over the set, for model selection
/// among epochs with tied validation accuracy.
pub(crate) fn eval_loaded_with_loss(
    spec: &ModelSpec,
    params: &ModelParams,
    samples: &[(Tensor, usize)],
) -> Result<(EvalReport, f64), PipelineError> {
    let scored = samples
        .par_iter()
        .map(|(input, truth)| {
            let (probs, _) = forward(spec, params, input)?;
            let loss = crate::nn::cross_entropy(&probs, *truth)?;
            Ok(((*truth, argmax_class(&probs)), loss))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let pairs: Vec<(usize, usize)> = scored.iter().map(|(p, _)| *p).collect();
    let mean_loss = scored.iter().map(|(_, l)| l).sum::<f64>() / samples.len().max(1) as f64;
    Ok((EvalReport::from_pairs(&pairs), mean_loss))
}

/// Evaluate a model on the manifest records named by `indices`.
pub fn evaluate(
    spec: &ModelSpec,
    params: &ModelParams,
    manifest: &DatasetManifest,
    indices: &[usize],
) -> Result<EvalReport, PipelineError> {
    if indices.is_empty() {
        return Err(PipelineError::EmptyIndexSet);
    }
    let (height, width) = probe_image_shape(spec, manifest, indices)?;
    let samples = indices
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
        .collect::<Result<Vec<_>, PipelineError>>()?;
    eval_loaded(spec, params, &samples)
}

/// Score a model trained on one rotor against another rotor's full manifest,
/// with no adaptation.
pub fn cross_evaluate(
    spec: &ModelSpec,
    params: &ModelParams,
    target: &DatasetManifest,
) -> Result<EvalReport, PipelineError> {
    evaluate(spec, params, target, &target.all_indices())
}

/// Image height/width for a run: read from the first resolvable record and
/// validated against the model spec, so a checkpoint/dataset mismatch fails
/// up front as a shape-composition error rather than sample by sample.
pub(crate) fn probe_image_shape(
    spec: &ModelSpec,
    manifest: &DatasetManifest,
    indices: &[usize],
) -> Result<(usize, usize), PipelineError> {
    let &first = indices.first().ok_or(PipelineError::EmptyIndexSet)?;
    let record = manifest
        .records
        .get(first)
        .ok_or(PipelineError::IndexOutOfRange {
            index: first,
            len: manifest.records.len(),
        })?;
    let image = crate::spectrogram::read_image(&manifest.resolve(record))?;
    spec.output_shape(&[3, image.height, image.width])?;
    Ok((image.height, image.width))
}
