//! Eigendecomposition of real nonsymmetric matrices.
//!
//! Balancing, Householder reduction to upper Hessenberg form, Francis
//! double-shift QR to real Schur form, then back-substitution for the
//! eigenvectors. The QR and back-substitution stages follow the classic
//! EISPACK `hqr2` formulation.

use std::cmp::Ordering;

use num_complex::Complex64;

use super::{invert, LinalgError, Matrix};

/// Condition estimate of the eigenvector matrix above which the input is
/// treated as non-diagonalizable.
pub const DEFECTIVE_CONDITION: f64 = 1e12;

/// Largest supported dimension.
pub const MAX_DIMENSION: usize = 4096;

/// QR sweeps allowed per unit of dimension.
pub const SWEEPS_PER_DIMENSION: usize = 40;

const RADIX: f64 = 2.0;

/// Eigenpairs of a real square matrix.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Eigenvalues, sorted by descending modulus, then descending real part,
    /// then descending imaginary part.
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix<Complex64>,
    /// `‖QV − VΛ‖_F / ‖Q‖_F`.
    pub residual: f64,
    /// 1-norm condition estimate `‖V‖₁·‖V⁻¹‖₁`.
    pub condition: f64,
}

/// Descending modulus, then descending real part, then descending imaginary part.
pub fn eigenvalue_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

pub fn eig_real_nonsymmetric(m: &Matrix<f64>) -> Result<EigenDecomposition, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > MAX_DIMENSION {
        return Err(LinalgError::TooLarge { dim: n, max: MAX_DIMENSION });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
            residual: 0.0,
            condition: 1.0,
        });
    }

    let mut h = m.clone();
    let scale = balance(&mut h);
    let mut ort = vec![0.0; n];
    let mut v = Matrix::<f64>::identity(n);
    reduce_to_hessenberg(&mut h, &mut v, &mut ort);
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    schur_and_vectors(&mut h, &mut v, &mut re, &mut im)?;

    // Undo balancing: eigenvectors of the original matrix are D·v.
    for i in 0..n {
        for j in 0..n {
            v[(i, j)] *= scale[i];
        }
    }

    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if im[j] == 0.0 {
            let col = v.column(j).into_iter().map(|x| Complex64::new(x, 0.0)).collect();
            pairs.push((Complex64::new(re[j], 0.0), col));
            j += 1;
        } else {
            let u = v.column(j);
            let w = v.column(j + 1);
            let plus: Vec<Complex64> = u.iter().zip(&w).map(|(&a, &b)| Complex64::new(a, b)).collect();
            let minus: Vec<Complex64> = plus.iter().map(|c| c.conj()).collect();
            pairs.push((Complex64::new(re[j], im[j]), plus));
            pairs.push((Complex64::new(re[j + 1], im[j + 1]), minus));
            j += 2;
        }
    }
    for (_, col) in pairs.iter_mut() {
        normalize_column(col);
    }
    pairs.sort_by(|a, b| eigenvalue_order(&a.0, &b.0));

    let values: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| pairs[j].1[i]);

    let condition = match invert(&vectors) {
        Ok(inv) => vectors.norm_one() * inv.norm_one(),
        Err(_) => f64::INFINITY,
    };
    if !(condition <= DEFECTIVE_CONDITION) {
        return Err(LinalgError::Defective { condition });
    }
    let residual = eigen_residual(m, &values, &vectors);
    Ok(EigenDecomposition {
        values,
        vectors,
        residual,
        condition,
    })
}

/// `‖QV − VΛ‖_F / ‖Q‖_F`, or the absolute residual when `Q = 0`.
pub fn eigen_residual(q: &Matrix<f64>, values: &[Complex64], vectors: &Matrix<Complex64>) -> f64 {
    let n = q.rows();
    let qc = q.to_complex();
    let qv = qc.matmul(vectors).expect("square operands");
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            sum += (qv[(i, j)] - vectors[(i, j)] * values[j]).norm_sqr();
        }
    }
    let qn = q.norm_frobenius();
    if qn > 0.0 {
        sum.sqrt() / qn
    } else {
        sum.sqrt()
    }
}

/// Unit 2-norm, phase chosen so the largest-modulus entry is real positive.
fn normalize_column(col: &mut [Complex64]) {
    let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, c) in col.iter().enumerate() {
        // Small relative slack keeps the choice stable between conjugate columns.
        if c.norm() > best_mod * (1.0 + 1e-12) {
            best = i;
            best_mod = c.norm();
        }
    }
    let phase = col[best].conj() / col[best].norm();
    for c in col.iter_mut() {
        *c = *c * phase / norm;
    }
}

/// Diagonal similarity scaling by powers of two; returns the scale vector `D`
/// such that the balanced matrix is `D⁻¹·A·D`.
fn balance(a: &mut Matrix<f64>) -> Vec<f64> {
    let n = a.rows();
    let mut scale = vec![1.0; n];
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                scale[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            return scale;
        }
    }
}

/// Householder reduction to upper Hessenberg form, accumulating the
/// orthogonal similarity into `v`.
fn reduce_to_hessenberg(h: &mut Matrix<f64>, v: &mut Matrix<f64>, ort: &mut [f64]) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    for m in (1..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[(i, j)];
            }
            g = (g / ort[m]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i];
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Francis double-shift QR on the Hessenberg matrix followed by
/// back-substitution. On return `re`/`im` hold the eigenvalues and the
/// columns of `v` the real Schur-derived eigenvectors (complex pairs stored
/// as consecutive real/imaginary columns).
fn schur_and_vectors(
    h: &mut Matrix<f64>,
    v: &mut Matrix<f64>,
    d: &mut [f64],
    e: &mut [f64],
) -> Result<(), LinalgError> {
    let nn = h.rows() as isize;
    let low: isize = 0;
    let high: isize = nn - 1;
    let eps = f64::EPSILON;
    let max_iterations = SWEEPS_PER_DIMENSION * nn as usize;
    let mut total_iterations = 0usize;

    macro_rules! hm {
        ($i:expr, $j:expr) => {
            h[(($i) as usize, ($j) as usize)]
        };
    }
    macro_rules! vm {
        ($i:expr, $j:expr) => {
            v[(($i) as usize, ($j) as usize)]
        };
    }

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += hm!(i, j).abs();
        }
    }

    let mut n = nn - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y): (f64, f64, f64, f64);
    let mut iter = 0;

    while n >= low {
        let mut l = n;
        while l > low {
            s = hm!(l - 1, l - 1).abs() + hm!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if hm!(l, l - 1) == 0.0 || hm!(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            hm!(n, n) += exshift;
            d[n as usize] = hm!(n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = hm!(n, n - 1) * hm!(n - 1, n);
            p = (hm!(n - 1, n - 1) - hm!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            hm!(n, n) += exshift;
            hm!(n - 1, n - 1) += exshift;
            x = hm!(n, n);
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = hm!(n, n - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in n - 1..nn {
                    z = hm!(n - 1, j);
                    hm!(n - 1, j) = q * z + p * hm!(n, j);
                    hm!(n, j) = q * hm!(n, j) - p * z;
                }
                for i in 0..=n {
                    z = hm!(i, n - 1);
                    hm!(i, n - 1) = q * z + p * hm!(i, n);
                    hm!(i, n) = q * hm!(i, n) - p * z;
                }
                for i in low..=high {
                    z = vm!(i, n - 1);
                    vm!(i, n - 1) = q * z + p * vm!(i, n);
                    vm!(i, n) = q * vm!(i, n) - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: form shift.
            x = hm!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = hm!(n - 1, n - 1);
                w = hm!(n, n - 1) * hm!(n - 1, n);
            }
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    hm!(i, i) -= x;
                }
                s = hm!(n, n - 1).abs() + hm!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        hm!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iterations += 1;
            if total_iterations > max_iterations {
                return Err(LinalgError::NoConvergence {
                    iterations: total_iterations,
                });
            }

            // Look for two consecutive small sub-diagonal elements.
            let mut m = n - 2;
            while m >= l {
                z = hm!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / hm!(m + 1, m) + hm!(m, m + 1);
                q = hm!(m + 1, m + 1) - z - r - s;
                r = hm!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if hm!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (hm!(m - 1, m - 1).abs() + z.abs() + hm!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                hm!(i, i - 2) = 0.0;
                if i > m + 2 {
                    hm!(i, i - 3) = 0.0;
                }
            }

            // Double QR step involving rows l:n and columns m:n.
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = hm!(k, k - 1);
                    q = hm!(k + 1, k - 1);
                    r = if notlast { hm!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        hm!(k, k - 1) = -s * x;
                    } else if l != m {
                        hm!(k, k - 1) = -hm!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = hm!(k, j) + q * hm!(k + 1, j);
                        if notlast {
                            p += r * hm!(k + 2, j);
                            hm!(k + 2, j) -= p * z;
                        }
                        hm!(k, j) -= p * x;
                        hm!(k + 1, j) -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * hm!(i, k) + y * hm!(i, k + 1);
                        if notlast {
                            p += z * hm!(i, k + 2);
                            hm!(i, k + 2) -= p * r;
                        }
                        hm!(i, k) -= p;
                        hm!(i, k + 1) -= p * q;
                    }
                    for i in low..=high {
                        p = x * vm!(i, k) + y * vm!(i, k + 1);
                        if notlast {
                            p += z * vm!(i, k + 2);
                            vm!(i, k + 2) -= p * r;
                        }
                        vm!(i, k) -= p;
                        vm!(i, k + 1) -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if norm == 0.0 {
        return Ok(());
    }

    // Back-substitute to find vectors of the upper triangular form.
    let mut n = nn - 1;
    while n >= 0 {
        p = d[n as usize];
        q = e[n as usize];
        if q == 0.0 {
            let mut l = n;
            hm!(n, n) = 1.0;
            let mut i = n - 1;
            while i >= 0 {
                w = hm!(i, i) - p;
                r = 0.0;
                for j in l..=n {
                    r += hm!(i, j) * hm!(j, n);
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        hm!(i, n) = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = hm!(i, i + 1);
                        y = hm!(i + 1, i);
                        q = (d[i as usize] - p) * (d[i as usize] - p) + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        hm!(i, n) = t;
                        hm!(i + 1, n) = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    // Overflow control.
                    t = hm!(i, n).abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            hm!(j, n) /= t;
                        }
                    }
                }
                i -= 1;
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            // Last vector component imaginary so matrix is triangular.
            if hm!(n, n - 1).abs() > hm!(n - 1, n).abs() {
                hm!(n - 1, n - 1) = q / hm!(n, n - 1);
                hm!(n - 1, n) = -(hm!(n, n) - p) / hm!(n, n - 1);
            } else {
                let (cr, ci) = cdiv(0.0, -hm!(n - 1, n), hm!(n - 1, n - 1) - p, q);
                hm!(n - 1, n - 1) = cr;
                hm!(n - 1, n) = ci;
            }
            hm!(n, n - 1) = 0.0;
            hm!(n, n) = 1.0;
            let mut i = n - 2;
            while i >= 0 {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += hm!(i, j) * hm!(j, n - 1);
                    sa += hm!(i, j) * hm!(j, n);
                }
                w = hm!(i, i) - p;
                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        hm!(i, n - 1) = cr;
                        hm!(i, n) = ci;
                    } else {
                        x = hm!(i, i + 1);
                        y = hm!(i + 1, i);
                        let di = d[i as usize] - p;
                        let mut vr = di * di + e[i as usize] * e[i as usize] - q * q;
                        let vi = di * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(
                            x * r - z * ra + q * sa,
                            x * s - z * sa - q * ra,
                            vr,
                            vi,
                        );
                        hm!(i, n - 1) = cr;
                        hm!(i, n) = ci;
                        if x.abs() > z.abs() + q.abs() {
                            hm!(i + 1, n - 1) = (-ra - w * hm!(i, n - 1) + q * hm!(i, n)) / x;
                            hm!(i + 1, n) = (-sa - w * hm!(i, n) - q * hm!(i, n - 1)) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * hm!(i, n - 1), -s - y * hm!(i, n), z, q);
                            hm!(i + 1, n - 1) = cr;
                            hm!(i + 1, n) = ci;
                        }
                    }
                    t = hm!(i, n - 1).abs().max(hm!(i, n).abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            hm!(j, n - 1) /= t;
                            hm!(j, n) /= t;
                        }
                    }
                }
                i -= 1;
            }
        }
        n -= 1;
    }

    // Back transformation to get eigenvectors of the original matrix.
    for j in (low..nn).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += vm!(i, k) * hm!(k, j);
            }
            vm!(i, j) = z;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn planar_rotation() {
        let m = Matrix::from_vec(2, 2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        let eig = eig_real_nonsymmetric(&m).unwrap();
        assert!(close(eig.values[0], Complex64::new(0.0, 1.0), 1e-14));
        assert!(close(eig.values[1], Complex64::new(0.0, -1.0), 1e-14));
        assert!(eig.residual < 1e-14);
    }

    #[test]
    fn diagonal_matrix() {
        let m = Matrix::diagonal(&[3.0, 1.0]);
        let eig = eig_real_nonsymmetric(&m).unwrap();
        assert_eq!(eig.values, vec![Complex64::new(3.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(close(eig.vectors[(0, 0)], Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(eig.vectors[(1, 0)], Complex64::new(0.0, 0.0), 1e-15));
        assert!(close(eig.vectors[(1, 1)], Complex64::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn per_pair_residual_by_direct_multiplication() {
        let m = random_matrix(16, 42);
        let eig = eig_real_nonsymmetric(&m).unwrap();
        assert!(eig.residual < 1e-8, "residual {}", eig.residual);
        let mc = m.to_complex();
        for (k, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vectors.column(k);
            let mv = mc.matvec(&v).unwrap();
            let err: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-10, "pair {k} residual {err}");
        }
    }

    #[test]
    fn sorted_and_conjugate_closed() {
        let m = random_matrix(12, 5);
        let eig = eig_real_nonsymmetric(&m).unwrap();
        for w in eig.values.windows(2) {
            assert_ne!(eigenvalue_order(&w[0], &w[1]), Ordering::Greater);
        }
        for lambda in &eig.values {
            assert!(eig.values.iter().any(|mu| close(*mu, lambda.conj(), 1e-8)));
        }
    }

    #[test]
    fn badly_scaled_matrix() {
        let mut m = random_matrix(10, 9);
        for i in 0..10 {
            for j in 0..10 {
                m[(i, j)] *= 10f64.powi(i as i32 - j as i32);
            }
        }
        let eig = eig_real_nonsymmetric(&m).unwrap();
        assert!(eig.residual < 1e-8);
    }

    #[test]
    fn jordan_block_is_defective() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(eig_real_nonsymmetric(&m), Err(LinalgError::Defective { .. })));
    }

    #[test]
    fn zero_and_trivial_sizes() {
        let eig = eig_real_nonsymmetric(&Matrix::<f64>::zeros(3, 3)).unwrap();
        assert!(eig.values.iter().all(|v| v.norm() == 0.0));
        let one = eig_real_nonsymmetric(&Matrix::from_vec(1, 1, vec![-2.5]).unwrap()).unwrap();
        assert_eq!(one.values[0], Complex64::new(-2.5, 0.0));
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            eig_real_nonsymmetric(&Matrix::<f64>::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }
}
