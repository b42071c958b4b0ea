//! Dense real and complex matrix kernels.

mod eigen;
mod lu;
mod matrix;
mod symmetric;

use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{
    eig_real_nonsymmetric, eigen_residual, eigenvalue_order, EigenDecomposition,
    DEFECTIVE_CONDITION, MAX_DIMENSION, SWEEPS_PER_DIMENSION,
};
pub use lu::{invert, solve, Lu, SINGULAR_PIVOT_RATIO};
pub use matrix::Matrix;
pub use symmetric::eig_symmetric;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("QR iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("matrix is not diagonalizable (eigenvector condition {condition:e})")]
    Defective { condition: f64 },
    #[error("dimension {dim} exceeds supported maximum {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub fn complex_matvec(m: &Matrix<Complex64>, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    m.matvec(x)
}

pub fn complex_matmul(
    a: &Matrix<Complex64>,
    b: &Matrix<Complex64>,
) -> Result<Matrix<Complex64>, LinalgError> {
    a.matmul(b)
}

pub fn complex_invert(m: &Matrix<Complex64>) -> Result<Matrix<Complex64>, LinalgError> {
    invert(m)
}
