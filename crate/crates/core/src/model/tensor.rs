use crate::scalar::Scalar;

/// Dense row-major tensor. Image batches use `[N, C, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape {shape:?}");
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }
}

/// Dot product with eight independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha·x`.
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`, four output rows per pass over `b`.
pub(crate) fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    let mut i = 0;
    while i + 4 <= m {
        let (o0, rest) = out[i * n..(i + 4) * n].split_at_mut(n);
        let (o1, rest) = rest.split_at_mut(n);
        let (o2, o3) = rest.split_at_mut(n);
        for r in 0..k {
            let (c0, c1, c2, c3) = (a[i * k + r], a[(i + 1) * k + r], a[(i + 2) * k + r], a[(i + 3) * k + r]);
            let br = &b[r * n..(r + 1) * n];
            for p in 0..n {
                let v = br[p];
                o0[p] += c0 * v;
                o1[p] += c1 * v;
                o2[p] += c2 * v;
                o3[p] += c3 * v;
            }
        }
        i += 4;
    }
    for i in i..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for r in 0..k {
            axpy(a[i * k + r], &b[r * n..(r + 1) * n], orow);
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`.
pub(crate) fn gemm_nt<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(ar, &b[j * k..(j + 1) * k]);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn patch(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn out_plane(&self) -> usize {
        self.out_height() * self.out_width()
    }

    /// Calls `f(col_row, out_pixel, input_index)` for every in-bounds tap;
    /// padded taps are skipped.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (ho, wo) = (self.out_height(), self.out_width());
        let k = self.kernel;
        for c in 0..self.in_channels {
            for ky in 0..k {
                for kx in 0..k {
                    let r = (c * k + ky) * k + kx;
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.width as isize {
                                continue;
                            }
                            f(r, oy * wo + ox, (c * self.height + iy as usize) * self.width + ix as usize);
                        }
                    }
                }
            }
        }
    }
}

/// Unfolds one `[C, H, W]` sample into `[C·k·k, Ho·Wo]`.
pub(crate) fn im2col<T: Scalar>(x: &[T], g: &ConvGeometry, cols: &mut [T]) {
    let p = g.out_plane();
    cols.iter_mut().for_each(|v| *v = T::zero());
    g.for_each_tap(|r, o, i| cols[r * p + o] = x[i]);
}

/// Adjoint of [`im2col`]: accumulates columns back into `dx`.
pub(crate) fn col2im<T: Scalar>(cols: &[T], g: &ConvGeometry, dx: &mut [T]) {
    let p = g.out_plane();
    g.for_each_tap(|r, o, i| dx[i] += cols[r * p + o]);
}
