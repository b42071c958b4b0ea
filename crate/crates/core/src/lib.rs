//! FINOLA: feature maps generated from a single latent vector by repeated
//! normalization plus a linear step.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod finola;
pub mod image;
pub mod io;
pub mod linalg;
pub mod masked;
pub mod model;
pub mod scalar;
pub mod wave;

pub use error::Error;
pub use finola::{FeatureMap, FinolaParams, LatentSet, Placement, Position, ScanOrder};
pub use image::Image;
pub use scalar::Scalar;

pub type FeatureMap64 = finola::FeatureMap<f64>;
pub type FeatureMap32 = finola::FeatureMap<f32>;
pub type FinolaParams64 = finola::FinolaParams<f64>;
pub type FinolaParams32 = finola::FinolaParams<f32>;
pub type LatentSet64 = finola::LatentSet<f64>;
pub type LatentSet32 = finola::LatentSet<f32>;
pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
