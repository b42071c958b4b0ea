//! Metrics and baselines used to evaluate reconstructions and latents.

mod curvature;
mod dct;
mod latent;
mod psnr;
mod quant;

use thiserror::Error;

pub use curvature::{gaussian_curvature, gaussian_curvature_with_spacing, CurvatureField};
pub use dct::{dct_baseline, zigzag_order, BLOCK};
pub use latent::{latent_interpolate, latent_mean, latent_pca, Pca};
pub use psnr::{mse, psnr, psnr_slices, PSNR_CAP_DB};
pub use quant::{dequantize, quantize_uniform, QuantSpec, Quantized};

use crate::image::ImageError;
use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("length mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn require_len(expected: usize, found: usize) -> Result<(), AnalysisError> {
    if expected != found {
        return Err(AnalysisError::ShapeMismatch { expected, found });
    }
    Ok(())
}
