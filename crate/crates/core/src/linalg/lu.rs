//! Elimination-based inversion and solving, shared by real and complex matrices.

use super::{LinalgError, Matrix};
use crate::scalar::Pivot;

/// Relative pivot threshold below which a matrix is reported singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

fn require_square<E: Copy>(m: &Matrix<E>) -> Result<usize, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(m.rows())
}

/// Gauss-Jordan inversion with partial pivoting.
pub fn invert<E: Pivot>(m: &Matrix<E>) -> Result<Matrix<E>, LinalgError> {
    let n = require_square(m)?;
    let threshold = SINGULAR_PIVOT_RATIO * m.norm_inf();
    let mut a = m.clone();
    let mut inv = Matrix::<E>::identity(n);

    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[(r, col)].modulus()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_mag > threshold) || pivot_mag == 0.0 {
            return Err(LinalgError::Singular {
                column: col,
                pivot: pivot_mag.max(0.0),
            });
        }
        if pivot_row != col {
            swap_rows(&mut a, pivot_row, col);
            swap_rows(&mut inv, pivot_row, col);
        }
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] = a[(col, j)] / p;
            inv[(col, j)] = inv[(col, j)] / p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f.modulus() == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                inv[(r, j)] = inv[(r, j)] - f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

fn swap_rows<E: Copy>(m: &mut Matrix<E>, r1: usize, r2: usize) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for j in 0..cols {
        data.swap(r1 * cols + j, r2 * cols + j);
    }
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct Lu<E> {
    factors: Matrix<E>,
    perm: Vec<usize>,
}

impl<E: Pivot> Lu<E> {
    pub fn factor(m: &Matrix<E>) -> Result<Self, LinalgError> {
        let n = require_square(m)?;
        let threshold = SINGULAR_PIVOT_RATIO * m.norm_inf();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, mag) = (k..n)
                .map(|r| (r, lu[(r, k)].modulus()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(mag > threshold) || mag == 0.0 {
                return Err(LinalgError::Singular {
                    column: k,
                    pivot: mag.max(0.0),
                });
            }
            if p != k {
                swap_rows(&mut lu, p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - l * lu[(k, j)];
                }
            }
        }
        Ok(Self { factors: lu, perm })
    }

    pub fn solve(&self, b: &[E]) -> Result<Vec<E>, LinalgError> {
        let n = self.factors.rows();
        if b.len() != n {
            return Err(LinalgError::ShapeMismatch {
                expected: (n, 1),
                found: (b.len(), 1),
            });
        }
        let mut x: Vec<E> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.factors[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.factors[(i, j)] * x[j];
            }
            x[i] = x[i] / self.factors[(i, i)];
        }
        Ok(x)
    }
}

/// Solves `m·x = b` through an LU factorization.
pub fn solve<E: Pivot>(m: &Matrix<E>, b: &[E]) -> Result<Vec<E>, LinalgError> {
    Lu::factor(m)?.solve(b)
}
