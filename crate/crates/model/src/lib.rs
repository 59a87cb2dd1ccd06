//! Gated graph neural network over program graphs.
//!
//! A vertex starts from its key embedding plus a two-slot root selector,
//! exchanges position-gated messages along six edge types (each flow forward
//! and backward) for `T` rounds with GRU updates, and is classified by a
//! gated two-class readout.

mod batch;
mod check;
mod config;
mod forward;
mod metrics;
mod params;
mod train;

use thiserror::Error;

pub use batch::{encode_batch, pack_batches, EncodedBatch, EDGE_TYPES};
pub use check::{check_model_gradients, MODEL_CHECK_EPSILON};
pub use config::{MaskMode, ModelConfig};
pub use forward::{
    forward, forward_values, message, readout, sinusoidal_embedding, ForwardOutput, ForwardValues, ParamVars,
};
pub use metrics::{Counts, Metrics};
pub use params::ModelParams;
pub use train::{evaluate, evaluate_with_loss, predict, train, GraphStore, HistoryRecord, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sinusoidal embedding needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error(transparent)]
    Tensor(#[from] flowgnn_tensor::TensorError),
    #[error("no graph with source id `{0}`")]
    MissingGraph(String),
    #[error("example for `{source_id}` has {labels} labels and root {root}, but the graph has {vertices} vertices")]
    ExampleMismatch {
        source_id: String,
        labels: usize,
        root: u32,
        vertices: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
