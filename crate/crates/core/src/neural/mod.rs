//! Reverse-mode differentiation, the graph-attention policy-value network
//! and its training objectives.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod net;
pub mod tape;
pub mod tensor;


pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::Checkpoint;
pub use loss::{
    alphatransit_loss, candidate_mask, masked_policy, ppo_loss, LossOutput, PolicyValueTarget, PpoCoefficients,
    PpoSample,
};
pub use net::{GraphBatch, NetConfig, NetOutput, NetParams};
pub use tape::{Tape, Var};
pub use tensor::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("policy mask has no valid entry")]
    EmptyMask,
    #[error("target puts mass on masked batch row {0}")]
    TargetOutsideMask(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
