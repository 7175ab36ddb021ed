//! Model topology, parameters, forward/backward composition, and SGD.

use super::layers;
use super::tensor::Tensor;
use super::NnError;
use crate::rng::GaussianSource;

/// One layer descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    Relu,
    MaxPool {
        size: usize,
    },
    AvgPool {
        size: usize,
    },
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }
}

/// Ordered layer topology. Construction checks structure; shape composition
/// is checked against a concrete input shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidSpec("model has no layers".into()));
        }
        let softmax_count = layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Softmax))
            .count();
        if softmax_count != 1 || !matches!(layers.last(), Some(LayerSpec::Softmax)) {
            return Err(NnError::InvalidSpec(
                "model must end with exactly one softmax layer".into(),
            ));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// The default two-class classifier over `[3, H, W]` images:
    /// one 5x5 conv to 8 channels, ReLU, 2x2 max pool, then a dense head.
    pub fn default_classifier(height: usize, width: usize) -> Self {
        let conv_h = height - 4;
        let conv_w = width - 4;
        let flat = 8 * (conv_h / 2) * (conv_w / 2);
        Self::new(vec![
            LayerSpec::Conv {
                kernel_h: 5,
                kernel_w: 5,
                in_channels: 3,
                out_channels: 8,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                in_dim: flat,
                out_dim: 2,
            },
            LayerSpec::Softmax,
        ])
        .unwrap()
    }

    /// Walk the layer list from `input_shape`, returning the output shape or
    /// the first composition failure.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        let mut shape = input_shape.to_vec();
        for (at, layer) in self.layers.iter().enumerate() {
            shape = layer_output_shape(layer, &shape)
                .map_err(|e| NnError::InvalidSpec(format!("layer {at} ({layer:?}): {e}")))?;
        }
        Ok(shape)
    }

    /// Index of the last Dense layer; the classification head.
    pub fn head_index(&self) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Dense { .. }))
    }
}

fn layer_output_shape(layer: &LayerSpec, input: &[usize]) -> Result<Vec<usize>, String> {
    match layer {
        LayerSpec::Conv {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            stride,
        } => {
            if input.len() != 3 || input[0] != *in_channels {
                return Err(format!("expected [{in_channels}, H, W], got {input:?}"));
            }
            let out = |dim: usize, k: usize| -> Result<usize, String> {
                if k > dim || (dim - k) % stride != 0 {
                    return Err(format!("kernel {k}/stride {stride} does not fit {dim}"));
                }
                Ok((dim - k) / stride + 1)
            };
            Ok(vec![
                *out_channels,
                out(input[1], *kernel_h)?,
                out(input[2], *kernel_w)?,
            ])
        }
        LayerSpec::Relu | LayerSpec::Softmax => Ok(input.to_vec()),
        LayerSpec::MaxPool { size } | LayerSpec::AvgPool { size } => {
            if input.len() != 3 {
                return Err(format!("expected rank-3 input, got {input:?}"));
            }
            if input[1] % size != 0 || input[2] % size != 0 {
                return Err(format!("pool size {size} does not divide {input:?}"));
            }
            Ok(vec![input[0], input[1] / size, input[2] / size])
        }
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        LayerSpec::Dense { in_dim, out_dim } => {
            let total: usize = input.iter().product();
            if input.len() != 1 || total != *in_dim {
                return Err(format!("expected [{in_dim}], got {input:?}"));
            }
            Ok(vec![*out_dim])
        }
    }
}

/// Weights and bias of one parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPair {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// All trainable parameters, aligned index-for-index with the spec's layers;
/// `None` for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<Option<ParamPair>>,
}

/// Accumulated parameter gradients, shape-congruent with [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: Vec<Option<ParamPair>>,
}

impl ModelParams {
    pub fn entries(&self) -> &[Option<ParamPair>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Option<ParamPair>] {
        &mut self.entries
    }

    pub fn from_entries(entries: Vec<Option<ParamPair>>) -> Self {
        Self { entries }
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.entries
            .iter()
            .flatten()
            .map(|p| p.weights.len() + p.bias.len())
            .sum()
    }
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            entries: params
                .entries
                .iter()
                .map(|e| {
                    e.as_ref().map(|p| ParamPair {
                        weights: Tensor::zeros(p.weights.shape().to_vec()),
                        bias: Tensor::zeros(p.bias.shape().to_vec()),
                    })
                })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[Option<ParamPair>] {
        &self.entries
    }

    pub fn from_entries(entries: Vec<Option<ParamPair>>) -> Self {
        Self { entries }
    }

    /// Accumulate another gradient set elementwise (sample-index order is the
    /// caller's responsibility, which keeps training bit-reproducible).
    pub fn accumulate(&mut self, other: &Gradients) {
        for (mine, theirs) in self.entries.iter_mut().zip(&other.entries) {
            if let (Some(a), Some(b)) = (mine.as_mut(), theirs.as_ref()) {
                for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                    *x += y;
                }
                for (x, y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                    *x += y;
                }
            }
        }
    }

    /// Scale all gradients, e.g. by 1/batch for a mean-gradient step.
    pub fn scale(&mut self, factor: f32) {
        for entry in self.entries.iter_mut().flatten() {
            for v in entry.weights.data_mut() {
                *v *= factor;
            }
            for v in entry.bias.data_mut() {
                *v *= factor;
            }
        }
    }

    /// Scale each layer's gradients by its own factor; used for fine-tuning
    /// with a reduced feature-layer learning rate.
    pub fn scale_per_layer(&mut self, factors: &[f32]) {
        assert_eq!(factors.len(), self.entries.len());
        for (entry, &factor) in self.entries.iter_mut().zip(factors) {
            if let Some(pair) = entry {
                for v in pair.weights.data_mut() {
                    *v *= factor;
                }
                for v in pair.bias.data_mut() {
                    *v *= factor;
                }
            }
        }
    }
}

/// He-style initialization: weights from N(0, 2/fan_in) on a seeded Gaussian
/// stream, biases zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ModelParams {
    let mut gauss = GaussianSource::new(seed);
    let entries = spec
        .layers()
        .iter()
        .map(|layer| match *layer {
            LayerSpec::Conv {
                kernel_h,
                kernel_w,
                in_channels,
                out_channels,
                ..
            } => {
                let fan_in = (in_channels * kernel_h * kernel_w) as f64;
                let std = (2.0 / fan_in).sqrt();
                let len = out_channels * in_channels * kernel_h * kernel_w;
                let weights = Tensor::new(
                    vec![out_channels, in_channels, kernel_h, kernel_w],
                    (0..len).map(|_| (gauss.next() * std) as f32).collect(),
                );
                Some(ParamPair {
                    weights,
                    bias: Tensor::zeros(vec![out_channels]),
                })
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                let std = (2.0 / in_dim as f64).sqrt();
                let weights = Tensor::new(
                    vec![out_dim, in_dim],
                    (0..out_dim * in_dim)
                        .map(|_| (gauss.next() * std) as f32)
                        .collect(),
                );
                Some(ParamPair {
                    weights,
                    bias: Tensor::zeros(vec![out_dim]),
                })
            }
            _ => None,
        })
        .collect();
    ModelParams { entries }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer, in layer order.
    inputs: Vec<Tensor>,
    /// Max-pool argmax tables, keyed by layer index.
    argmaxes: Vec<Option<Vec<usize>>>,
    /// Final class probabilities.
    probs: Tensor,
}

impl ForwardCache {
    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub(crate) fn layer_input(&self, at: usize) -> &Tensor {
        &self.inputs[at]
    }

    pub(crate) fn pool_argmax(&self, at: usize) -> Option<&[usize]> {
        self.argmaxes[at].as_deref()
    }
}

/// Run the network on one input, returning class probabilities and the cache
/// for [`backward`]. The input is expected pre-normalized (images divide
/// their 8-bit pixels by 255).
pub fn forward(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &Tensor,
) -> Result<(Tensor, ForwardCache), NnError> {
    check_congruence(spec, params)?;
    let mut inputs = Vec::with_capacity(spec.layers().len());
    let mut argmaxes = vec![None; spec.layers().len()];
    let mut current = input.clone();
    for (at, layer) in spec.layers().iter().enumerate() {
        inputs.push(current.clone());
        current = match (layer, &params.entries[at]) {
            (LayerSpec::Conv { stride, .. }, Some(p)) => {
                layers::conv2d_forward(&current, &p.weights, &p.bias, *stride)?
            }
            (LayerSpec::Relu, _) => layers::relu(&current),
            (LayerSpec::MaxPool { size }, _) => {
                let (out, argmax) = layers::maxpool(&current, *size)?;
                argmaxes[at] = Some(argmax);
                out
            }
            (LayerSpec::AvgPool { size }, _) => layers::avgpool(&current, *size)?,
            (LayerSpec::Flatten, _) => current.reshaped(vec![current.len()]),
            (LayerSpec::Dense { .. }, Some(p)) => {
                layers::dense_forward(&current, &p.weights, &p.bias)?
            }
            (LayerSpec::Softmax, _) => layers::softmax(&current),
            (other, None) => {
                return Err(NnError::InvalidSpec(format!(
                    "layer {at} ({other:?}) is missing parameters"
                )))
            }
        };
    }
    let probs = current.clone();
    Ok((
        current,
        ForwardCache {
            inputs,
            argmaxes,
            probs,
        },
    ))
}

/// Exact gradients of `cross_entropy(forward(input), label)` with respect to
/// every parameter. Softmax and cross-entropy fuse to `p - onehot(label)` at
/// the logits.
pub fn backward(
    spec: &ModelSpec,
    params: &ModelParams,
    cache: &ForwardCache,
    label: usize,
) -> Result<Gradients, NnError> {
    check_congruence(spec, params)?;
    if cache.inputs.len() != spec.layers().len() {
        return Err(NnError::InvalidSpec(
            "cache does not match model spec".into(),
        ));
    }
    if label >= cache.probs.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: cache.probs.len(),
        });
    }

    let mut grads = Gradients::zeros_like(params);
    let mut grad = layers::softmax_cross_entropy_grad(&cache.probs, label);

    for at in (0..spec.layers().len()).rev() {
        let layer = &spec.layers()[at];
        let input = &cache.inputs[at];
        grad = match (layer, &params.entries[at]) {
            (LayerSpec::Softmax, _) => grad, // fused with the loss
            (LayerSpec::Dense { .. }, Some(p)) => {
                let (d_w, d_b, d_x) = layers::dense_backward(input, &p.weights, &grad)?;
                grads.entries[at] = Some(ParamPair {
                    weights: d_w,
                    bias: d_b,
                });
                d_x
            }
            (LayerSpec::Flatten, _) => grad.reshaped(input.shape().to_vec()),
            (LayerSpec::MaxPool { .. }, _) => {
                let argmax = cache.argmaxes[at]
                    .as_ref()
                    .ok_or_else(|| NnError::InvalidSpec("missing max-pool cache".into()))?;
                layers::maxpool_backward(input.shape(), argmax, &grad)
            }
            (LayerSpec::AvgPool { size }, _) => {
                layers::avgpool_backward(input.shape(), *size, &grad)
            }
            (LayerSpec::Relu, _) => layers::relu_backward(input, &grad),
            (LayerSpec::Conv { stride, .. }, Some(p)) => {
                let (d_w, d_b, d_x) = layers::conv2d_backward(input, &p.weights, *stride, &grad)?;
                grads.entries[at] = Some(ParamPair {
                    weights: d_w,
                    bias: d_b,
                });
                d_x
            }
            (other, None) => {
                return Err(NnError::InvalidSpec(format!(
                    "layer {at} ({other:?}) is missing parameters"
                )))
            }
        };
    }
    Ok(grads)
}

/// Plain SGD: `theta <- theta - lr * g`, elementwise.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &Gradients,
    learning_rate: f32,
) -> Result<(), NnError> {
    if params.entries.len() != grads.entries.len() {
        return Err(NnError::ShapeMismatch(
            "gradient set does not match parameter set".into(),
        ));
    }
    for (p, g) in params.entries.iter_mut().zip(&grads.entries) {
        match (p, g) {
            (Some(p), Some(g)) => {
                if p.weights.shape() != g.weights.shape() || p.bias.shape() != g.bias.shape() {
                    return Err(NnError::ShapeMismatch(
                        "gradient shapes do not match parameter shapes".into(),
                    ));
                }
                for (x, d) in p.weights.data_mut().iter_mut().zip(g.weights.data()) {
                    *x -= learning_rate * d;
                }
                for (x, d) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
                    *x -= learning_rate * d;
                }
            }
            (None, None) => {}
            _ => {
                return Err(NnError::ShapeMismatch(
                    "gradient layering does not match parameters".into(),
                ))
            }
        }
    }
    Ok(())
}

fn check_congruence(spec: &ModelSpec, params: &ModelParams) -> Result<(), NnError> {
    if spec.layers().len() != params.entries.len() {
        return Err(NnError::InvalidSpec(format!(
            "spec has {} layers but params cover {}",
            spec.layers().len(),
            params.entries.len()
        )));
    }
    for (at, (layer, entry)) in spec.layers().iter().zip(&params.entries).enumerate() {
        if layer.has_params() != entry.is_some() {
            return Err(NnError::InvalidSpec(format!(
                "layer {at} parameter presence does not match spec"
            )));
        }
    }
    Ok(())
}
