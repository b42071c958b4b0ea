//! Top-level error with the process exit-code mapping used by the CLI:
//! 2 usage, 3 data, 4 numerical.

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::finola::FinolaError;
use crate::io::IoError;
use crate::linalg::LinalgError;
use crate::masked::MaskError;
use crate::model::ModelError;
use crate::wave::WaveError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Finola(#[from] FinolaError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    /// A computed check (e.g. a gradient or equality test) did not pass.
    #[error("{0}")]
    CheckFailed(String),
}

fn linalg_is_numerical(e: &LinalgError) -> bool {
    matches!(
        e,
        LinalgError::Singular { .. } | LinalgError::Defective { .. } | LinalgError::NoConvergence { .. } | LinalgError::NonFinite
    )
}

fn wave_is_numerical(e: &WaveError) -> bool {
    match e {
        WaveError::Linalg(l) => linalg_is_numerical(l),
        WaveError::InaccurateBasis { .. } | WaveError::DegenerateDenominator { .. } | WaveError::ZeroBeta { .. } => true,
        WaveError::Propagation(_) | WaveError::ChannelMismatch { .. } => false,
    }
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Linalg(e) => linalg_is_numerical(e),
            Error::Wave(e) => wave_is_numerical(e),
            Error::Analysis(AnalysisError::Linalg(e)) => linalg_is_numerical(e),
            Error::Model(ModelError::Wave(e)) => wave_is_numerical(e),
            Error::Model(ModelError::NonFinite(_)) | Error::CheckFailed(_) => true,
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            e if e.is_numerical() => 4,
            _ => 3,
        }
    }

    /// Short machine-readable category for the `error,<kind>,<message>` line.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            4 => "numerical",
            _ => "data",
        }
    }
}
