//! Dense row-major `f64` tensors and a reverse-mode tape.
//!
//! Operations are recorded on a [`Tape`] as they run; [`Tape::backward`]
//! then visits the recorded nodes once, newest first. Summation order is
//! fixed everywhere so results are bit-reproducible.

mod adam;
mod check;
mod checkpoint;
mod kernels;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use check::{grad_check, primitive_suite, relative_error, GradCheckReport};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use kernels::{matmul_nn, matmul_tn, transpose};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },
    #[error("loss mask selects no element")]
    EmptyMask,
    #[error("index {index} out of range for {len} rows in {op}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
