use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::image::Image;

pub const BLOCK: usize = 8;

fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static TABLE: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (k, row) in t.iter_mut().enumerate() {
            let alpha = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for (i, v) in row.iter_mut().enumerate() {
                *v = alpha * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n)).cos();
            }
        }
        t
    })
}

/// JPEG zig-zag scan of an 8×8 block as `(row, col)` pairs.
pub fn zigzag_order() -> [(usize, usize); BLOCK * BLOCK] {
    let mut out = [(0, 0); BLOCK * BLOCK];
    let mut n = 0;
    for s in 0..2 * BLOCK - 1 {
        let lo = s.saturating_sub(BLOCK - 1);
        let hi = s.min(BLOCK - 1);
        if s % 2 == 0 {
            for r in (lo..=hi).rev() {
                out[n] = (r, s - r);
                n += 1;
            }
        } else {
            for r in lo..=hi {
                out[n] = (r, s - r);
                n += 1;
            }
        }
    }
    out
}

type Block = [[f64; BLOCK]; BLOCK];

fn forward(block: &Block) -> Block {
    let t = basis();
    let mut tmp = [[0.0; BLOCK]; BLOCK];
    for (r, row) in block.iter().enumerate() {
        for k in 0..BLOCK {
            tmp[r][k] = (0..BLOCK).map(|i| t[k][i] * row[i]).sum();
        }
    }
    let mut out = [[0.0; BLOCK]; BLOCK];
    for k in 0..BLOCK {
        for c in 0..BLOCK {
            out[k][c] = (0..BLOCK).map(|i| t[k][i] * tmp[i][c]).sum();
        }
    }
    out
}

fn inverse(coef: &Block) -> Block {
    let t = basis();
    let mut tmp = [[0.0; BLOCK]; BLOCK];
    for i in 0..BLOCK {
        for c in 0..BLOCK {
            tmp[i][c] = (0..BLOCK).map(|k| t[k][i] * coef[k][c]).sum();
        }
    }
    let mut out = [[0.0; BLOCK]; BLOCK];
    for (r, row) in tmp.iter().enumerate() {
        for i in 0..BLOCK {
            out[r][i] = (0..BLOCK).map(|k| t[k][i] * row[k]).sum();
        }
    }
    out
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Blockwise orthonormal DCT keeping the first `k` zig-zag coefficients.
/// Images whose sides are not multiples of 8 are reflect-padded and cropped back.
pub fn dct_baseline(image: &Image, k: usize) -> Image {
    let k = k.clamp(1, BLOCK * BLOCK);
    let zz = zigzag_order();
    let (w, h, ch) = image.shape();
    let mut out = image.clone();
    for c in 0..ch {
        for by in (0..h).step_by(BLOCK) {
            for bx in (0..w).step_by(BLOCK) {
                let mut block = [[0.0; BLOCK]; BLOCK];
                for (r, row) in block.iter_mut().enumerate() {
                    for (col, v) in row.iter_mut().enumerate() {
                        *v = image.get(reflect(bx + col, w), reflect(by + r, h), c);
                    }
                }
                let coef = forward(&block);
                let mut kept = [[0.0; BLOCK]; BLOCK];
                for &(r, col) in &zz[..k] {
                    kept[r][col] = coef[r][col];
                }
                let rec = inverse(&kept);
                for (r, row) in rec.iter().enumerate() {
                    for (col, &v) in row.iter().enumerate() {
                        if bx + col < w && by + r < h {
                            out.set(bx + col, by + r, c, v);
                        }
                    }
                }
            }
        }
    }
    out
}
