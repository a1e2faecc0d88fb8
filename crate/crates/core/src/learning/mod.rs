//! Small dense-network engine: softmax regression and one-hidden-layer ReLU
//! MLPs trained with mini-batch SGD.

mod codec;
mod dataset;
mod model;
mod nn;

use thiserror::Error;

pub use codec::{deserialize, serialize, Compression};
pub use dataset::Dataset;
pub use model::{init_model, ModelParams, ModelShape};
pub use nn::{evaluate, input_gradient, loss_and_grad, predict, sgd_step, softmax, train, EvalMetrics, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("invalid model shape: {0}")]
    InvalidShape(String),
    #[error("weight vector has {got} entries, shape needs {expected}")]
    WeightCount { expected: usize, got: usize },
    #[error("non-finite weight at index {0}")]
    NonFiniteWeight(usize),
    #[error("feature width {got} does not match model input {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite value in forward pass at layer {layer}")]
    Numeric { layer: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed weight bytes: {0}")]
    Format(String),
}
