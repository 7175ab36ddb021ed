//! Finite-difference validation of the analytic gradients.
//!
//! Central differences are taken through the network *linearized at the
//! forward pass's working point*: ReLU masks and max-pool selections are
//! frozen from the unperturbed forward, and the loss is evaluated in f64.
//! The analytic gradient differentiates exactly that piecewise-linear
//! branch, so the comparison isolates backpropagation errors; without
//! freezing, branch kinks crossing the difference interval dominate the
//! measurement at realistic layer widths, regardless of the step size.
//! The frozen evaluator below is forward-only and shares no code with
//! `backward`, which is the thing under test.

use super::model::{ForwardCache, LayerSpec, ModelParams, ModelSpec};
use super::tensor::Tensor;
use super::NnError;
use crate::rng::SplitMix64;

/// Outcome of one finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Relative error of every checked parameter.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub median_error: f64,
    /// Number of parameters compared.
    pub checked: usize,
}

/// Parameters checked per parametric layer (all of them when a layer is
/// smaller than this).
const SAMPLE_PER_LAYER: usize = 200;

/// Compare analytic gradients against central finite differences
/// `(L(theta + eps) - L(theta - eps)) / 2 eps` on a seeded subsample of at
/// least [`SAMPLE_PER_LAYER`] parameters per layer, returning the maximum of
/// `|g - g_fd| / max(|g|, |g_fd|, 1e-8)`.
pub fn grad_check(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &Tensor,
    label: usize,
    epsilon: f64,
    seed: u64,
) -> Result<f64, NnError> {
    Ok(grad_check_detailed(spec, params, input, label, epsilon, seed)?.max_error)
}

/// As [`grad_check`], but returning every per-parameter error.
pub fn grad_check_detailed(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &Tensor,
    label: usize,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport, NnError> {
    assert!(
        (1e-4..=1e-2).contains(&epsilon),
        "epsilon must lie in [1e-4, 1e-2], got {epsilon}"
    );

    let (_, cache) = super::model::forward(spec, params, input)?;
    let analytic = super::model::backward(spec, params, &cache, label)?;
    let branches = FrozenBranches::from_cache(spec, &cache);

    let mut flat = FlatParams::from_params(params);
    let input_f64: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();

    let mut rng = SplitMix64::new(seed);
    let mut errors = Vec::new();
    for (layer_at, entry) in params.entries().iter().enumerate() {
        let Some(pair) = entry else { continue };
        let layer_len = pair.weights.len() + pair.bias.len();
        let picks = sample_indices(&mut rng, layer_len, SAMPLE_PER_LAYER);
        for pick in picks {
            let analytic_entry = analytic.entries()[layer_at].as_ref().unwrap();
            let g = if pick < pair.weights.len() {
                analytic_entry.weights.data()[pick] as f64
            } else {
                analytic_entry.bias.data()[pick - pair.weights.len()] as f64
            };

            let original = flat.get(layer_at, pick);
            flat.set(layer_at, pick, original + epsilon);
            let loss_plus =
                eval_frozen_loss(spec, &flat, &input_f64, input.shape(), &branches, label)?;
            flat.set(layer_at, pick, original - epsilon);
            let loss_minus =
                eval_frozen_loss(spec, &flat, &input_f64, input.shape(), &branches, label)?;
            flat.set(layer_at, pick, original);

            let fd = (loss_plus - loss_minus) / (2.0 * epsilon);
            let denom = g.abs().max(fd.abs()).max(1e-8);
            errors.push((g - fd).abs() / denom);
        }
    }

    let checked = errors.len();
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let median_error = median(&mut errors.clone());
    Ok(GradCheckReport {
        errors,
        max_error,
        median_error,
        checked,
    })
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Distinct indices in [0, len): everything when len <= want, otherwise a
/// seeded partial Fisher-Yates draw of `want` indices.
fn sample_indices(rng: &mut SplitMix64, len: usize, want: usize) -> Vec<usize> {
    if len <= want {
        return (0..len).collect();
    }
    let mut pool: Vec<usize> = (0..len).collect();
    for i in 0..want {
        let j = i + rng.next_below((len - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(want);
    pool
}

/// Mutable f64 copy of the parameters, indexed (layer, weights-then-bias).
struct FlatParams {
    layers: Vec<Option<Vec<f64>>>,
    weight_lens: Vec<usize>,
}

impl FlatParams {
    fn from_params(params: &ModelParams) -> Self {
        let mut layers = Vec::new();
        let mut weight_lens = Vec::new();
        for entry in params.entries() {
            match entry {
                Some(pair) => {
                    let mut buf: Vec<f64> = pair.weights.data().iter().map(|&v| v as f64).collect();
                    buf.extend(pair.bias.data().iter().map(|&v| v as f64));
                    weight_lens.push(pair.weights.len());
                    layers.push(Some(buf));
                }
                None => {
                    weight_lens.push(0);
                    layers.push(None);
                }
            }
        }
        Self {
            layers,
            weight_lens,
        }
    }

    fn get(&self, layer: usize, at: usize) -> f64 {
        self.layers[layer].as_ref().unwrap()[at]
    }

    fn set(&mut self, layer: usize, at: usize, value: f64) {
        self.layers[layer].as_mut().unwrap()[at] = value;
    }
}

/// The working point's branch decisions: one entry per layer.
struct FrozenBranches {
    /// For each ReLU layer, which inputs were active (> 0).
    relu_masks: Vec<Option<Vec<bool>>>,
    /// For each max-pool layer, the flat input index each output selected.
    pool_picks: Vec<Option<Vec<usize>>>,
}

impl FrozenBranches {
    fn from_cache(spec: &ModelSpec, cache: &ForwardCache) -> Self {
        let mut relu_masks = vec![None; spec.layers().len()];
        let mut pool_picks = vec![None; spec.layers().len()];
        for (at, layer) in spec.layers().iter().enumerate() {
            match layer {
                LayerSpec::Relu => {
                    relu_masks[at] = Some(
                        cache
                            .layer_input(at)
                            .data()
                            .iter()
                            .map(|&v| v > 0.0)
                            .collect(),
                    );
                }
                LayerSpec::MaxPool { .. } => {
                    pool_picks[at] = cache.pool_argmax(at).map(|a| a.to_vec());
                }
                _ => {}
            }
        }
        Self {
            relu_masks,
            pool_picks,
        }
    }
}

/// Loss of the branch-frozen network in f64.
fn eval_frozen_loss(
    spec: &ModelSpec,
    flat: &FlatParams,
    input: &[f64],
    input_shape: &[usize],
    branches: &FrozenBranches,
    label: usize,
) -> Result<f64, NnError> {
    let mut data = input.to_vec();
    let mut shape: Vec<usize> = input_shape.to_vec();

    for (at, layer) in spec.layers().iter().enumerate() {
        match *layer {
            LayerSpec::Conv {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
                stride,
            } => {
                let buf = flat.layers[at].as_ref().unwrap();
                let (weights, bias) = buf.split_at(flat.weight_lens[at]);
                let (h, w) = (shape[1], shape[2]);
                let oh = (h - kernel_h) / stride + 1;
                let ow = (w - kernel_w) / stride + 1;
                let mut out = vec![0.0f64; out_channels * oh * ow];
                for o in 0..out_channels {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut acc = bias[o];
                            for c in 0..in_channels {
                                for u in 0..kernel_h {
                                    let in_row = (c * h + i * stride + u) * w + j * stride;
                                    let w_row = ((o * in_channels + c) * kernel_h + u) * kernel_w;
                                    for v in 0..kernel_w {
                                        acc += weights[w_row + v] * data[in_row + v];
                                    }
                                }
                            }
                            out[(o * oh + i) * ow + j] = acc;
                        }
                    }
                }
                data = out;
                shape = vec![out_channels, oh, ow];
            }
            LayerSpec::Relu => {
                let mask = branches.relu_masks[at]
                    .as_ref()
                    .ok_or_else(|| NnError::InvalidSpec("missing frozen ReLU mask".into()))?;
                for (v, &keep) in data.iter_mut().zip(mask) {
                    if !keep {
                        *v = 0.0;
                    }
                }
            }
            LayerSpec::MaxPool { size } => {
                let picks = branches.pool_picks[at]
                    .as_ref()
                    .ok_or_else(|| NnError::InvalidSpec("missing frozen pool picks".into()))?;
                data = picks.iter().map(|&src| data[src]).collect();
                shape = vec![shape[0], shape[1] / size, shape[2] / size];
            }
            LayerSpec::AvgPool { size } => {
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let (oh, ow) = (h / size, w / size);
                let inv_area = 1.0 / (size * size) as f64;
                let mut out = vec![0.0f64; c * oh * ow];
                for ch in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut acc = 0.0;
                            for u in 0..size {
                                for v in 0..size {
                                    acc += data[(ch * h + i * size + u) * w + j * size + v];
                                }
                            }
                            out[(ch * oh + i) * ow + j] = acc * inv_area;
                        }
                    }
                }
                data = out;
                shape = vec![c, oh, ow];
            }
            LayerSpec::Flatten => {}
            LayerSpec::Dense { in_dim, out_dim } => {
                let buf = flat.layers[at].as_ref().unwrap();
                let (weights, bias) = buf.split_at(flat.weight_lens[at]);
                let mut out = vec![0.0f64; out_dim];
                for o in 0..out_dim {
                    let mut acc = bias[o];
                    let row = o * in_dim;
                    for i in 0..in_dim {
                        acc += weights[row + i] * data[i];
                    }
                    out[o] = acc;
                }
                data = out;
            }
            LayerSpec::Softmax => {
                let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in &mut data {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in &mut data {
                    *v /= sum;
                }
            }
        }
    }

    if label >= data.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: data.len(),
        });
    }
    Ok(-(data[label] + 1e-12).ln())
}
