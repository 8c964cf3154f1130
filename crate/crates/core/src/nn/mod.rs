//! A small trainable stack for GNNs whose shift operator is learned.
//!
//! Everything is differentiated by hand: dense parts with the usual
//! matrix identities, the operator with the analytic partials of
//! [`crate::operator::PreparedOperator`].

mod adam;
mod layers;
mod model;

pub use adam::{AdamConfig, AdamState, GroupLayout, ParamBlock, ParamGroup};
pub use layers::{
    gcn_pgso_layer, gin_pgso_layer, readout, sgc_pgso_forward, softmax_cross_entropy, Activation, LayerWeights,
    ReadoutMode,
};
pub use model::{Architecture, ForwardCache, Gradients, Model, ModelSpec, OperatorMode, OperatorSlot, Stage, Task};

use crate::operator::OperatorError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("mask selects no rows")]
    EmptyMask,
    #[error("target {target} out of range for {classes} classes")]
    TargetRange { target: usize, classes: usize },
    #[error("readout of an empty graph")]
    EmptyGraph,
    #[error("non-finite gradient in {0}; step skipped")]
    NonFiniteGradient(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, NnError>;
