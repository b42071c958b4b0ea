use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use num_traits::{One, Zero};

use super::LinalgError;
use crate::scalar::{Pivot, Scalar};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy> Matrix<E> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<E> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<E> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<F: Copy>(&self, f: impl Fn(E) -> F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<E: Copy + Zero + One> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![E::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { E::one() } else { E::zero() })
    }

    pub fn diagonal(values: &[E]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { E::zero() })
    }
}

impl<E: Copy + num_traits::Num> Matrix<E> {
    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::ShapeMismatch {
                expected: (self.cols, rhs.cols),
                found: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[E]) -> Result<Vec<E>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::ShapeMismatch {
                expected: (self.cols, 1),
                found: (x.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(E::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(rhs)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(rhs)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: E) -> Self {
        self.map(|v| v * s)
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<(), LinalgError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(LinalgError::ShapeMismatch {
                expected: (self.rows, self.cols),
                found: (rhs.rows, rhs.cols),
            });
        }
        Ok(())
    }
}

impl<E: Pivot> Matrix<E> {
    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(Pivot::modulus).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data
            .iter()
            .map(|v| {
                let m = v.modulus();
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.modulus().is_finite())
    }
}

impl<T: Scalar> Matrix<T> {
    /// Widen to `f64` for the dense kernels.
    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|v| v.to_f64_lossy())
    }

    pub fn from_f64(m: &Matrix<f64>) -> Self {
        m.map(T::from_f64_lossy)
    }
}

impl Matrix<f64> {
    pub fn to_complex(&self) -> Matrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;

    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec_is_identity() {
        let id = Matrix::<Complex64>::identity(3);
        let x = vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(-3.0, 0.5),
            Complex64::new(0.0, -1.0),
        ];
        assert_eq!(id.matvec(&x).unwrap(), x);
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(LinalgError::ShapeMismatch { .. })));
        assert!(a.matvec(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn norms() {
        let m = Matrix::from_vec(2, 2, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.norm_inf(), 7.0);
        assert_eq!(m.norm_one(), 6.0);
        assert!((m.norm_frobenius() - 30f64.sqrt()).abs() < 1e-15);
    }
}
