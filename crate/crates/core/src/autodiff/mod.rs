//! Dense tensors, a reverse-mode differentiation graph and parameter storage.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckOptions};
pub use graph::{Axis, Gradients, Graph, Var};
pub use params::{AdamState, Param, ParamId, ParamSnapshot, ParamStore, StoredTensor, CHECKPOINT_VERSION};
pub use tensor::Tensor;

use thiserror::Error;

/// Floor applied to every `log` argument.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),
    #[error("loss must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{0} needs at least one input")]
    EmptyInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parameter `{0}` already exists")]
    DuplicateParam(String),
    #[error("parameter `{0}` missing from checkpoint")]
    MissingParam(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests;
