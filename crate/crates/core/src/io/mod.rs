//! File formats: PGM/PPM images, binary checkpoints, run configuration and
//! CSV metrics.

mod checkpoint;
mod config;
mod metrics;
mod pgm;

use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointDims, StoredTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{load_dataset, DatasetSource, Precision, RunConfig};
pub use metrics::MetricsWriter;
pub use pgm::{decode_pnm, encode_pnm, read_image, write_gray, write_heatmap, write_image};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("dataset: {0}")]
    Dataset(String),
}

impl IoError {
    pub(crate) fn from_std(path: &std::path::Path, e: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
