//! Trainable image autoencoder with a FINOLA bottleneck.
//!
//! Images are encoded to M latent vectors, expanded into a feature map by
//! multi-path propagation, and decoded back with upsampling convolutions.
//! Gradients come from a small reverse-mode tape.

mod data;
mod gradcheck;
mod network;
mod optim;
mod tape;
mod tensor;
mod train;

use thiserror::Error;

pub use data::{mean_image, mean_image_baseline_psnr, synthetic_images};
pub use gradcheck::{grad_check, model_grad_check, GradCheckOptions, GradCheckReport, GroupReport};
pub use network::{batch_tensor, DecoderBlock, DecoderSpec, Model, ModelConfig, Network, Outputs, ParamEntry, ParamStore};
pub use optim::{AdamW, TrainConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
pub use train::{evaluate_psnr, train, train_step, EpochMetrics};

use crate::finola::FinolaError;
use crate::image::ImageError;
use crate::wave::WaveError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss mask selects no elements")]
    EmptyMask,
    #[error("backward called on a node that is not on the tape")]
    GraphNotEvaluated,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    NonFinite(String),
    #[error(transparent)]
    Finola(#[from] FinolaError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[cfg(test)]
mod tests;
