//! A minimal from-scratch neural-network engine: f32 tensors, conv / ReLU /
//! pool / dense / softmax layers with exact backpropagation, SGD,
//! finite-difference gradient checking, and a bit-exact checkpoint format.

mod checkpoint;
mod gradcheck;
pub mod layers;
mod model;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, grad_check_detailed, GradCheckReport};
pub use layers::{avgpool, conv2d_forward, cross_entropy, dense_forward, maxpool, relu, softmax};
pub use model::{
    backward, forward, init_params, sgd_step, ForwardCache, Gradients, LayerSpec, ModelParams,
    ModelSpec, ParamPair,
};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("convolution output is not integral: input {input}, kernel {kernel}, stride {stride}")]
    NonIntegralOutput {
        input: usize,
        kernel: usize,
        stride: usize,
    },

    #[error("pool size {size} does not divide {h}x{w}")]
    IndivisibleDims { h: usize, w: usize, size: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("checkpoint has wrong magic bytes")]
    BadMagic,

    #[error("checkpoint version {found} unsupported (supported: {supported})")]
    VersionMismatch { found: u16, supported: u16 },

    #[error("checkpoint truncated at byte {at_byte}")]
    TruncatedCheckpoint { at_byte: usize },

    #[error("checkpoint has {extra} trailing bytes")]
    TrailingCheckpointBytes { extra: usize },

    #[error("unknown layer tag {0} in checkpoint")]
    InvalidLayerTag(u8),

    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
