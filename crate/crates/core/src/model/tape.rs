//! Define-by-run reverse-mode differentiation over [`Tensor`]s.

use super::tensor::{axpy, col2im, gemm_nn, gemm_nt, im2col, ConvGeometry, Tensor};
use super::ModelError;
use crate::finola::normalize_into;
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Scale(Var, T),
    /// `[n, k] × [m, k]ᵀ → [n, m]`.
    MatMulT(Var, Var),
    /// `[n, m] + [m]` broadcast over rows.
    AddRowBias(Var, Var),
    /// `[n, m] · diag([m])`.
    ScaleColumns(Var, Var),
    /// Per-row normalization over the last axis; keeps `(σ, σ + ε)` per row.
    LayerNorm { x: Var, stats: Vec<(T, T)> },
    Conv2d { x: Var, w: Var, b: Var, stride: usize, pad: usize },
    Silu(Var),
    Upsample2(Var),
    /// `[N, C, H, W] → [N, C]`.
    MeanPool(Var),
    /// `[n, m] → [n, len]`, columns `start..start+len`.
    SliceCols { x: Var, start: usize },
    /// Row-major `H×W` grid of `[N, C]` cells into `[N, C, H, W]`.
    AssembleMap { cells: Vec<Var>, height: usize, width: usize },
    Mse { x: Var, target: Vec<T>, mask: Option<Vec<bool>>, count: usize },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one scalar with respect to every node of a tape.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Zero-filled when the node does not influence the loss.
    pub fn wrt(&self, v: Var, len: usize) -> Vec<T> {
        self.grads[v.0].clone().unwrap_or_else(|| vec![T::zero(); len])
    }
}

fn shape_err(what: &str, a: &[usize], b: &[usize]) -> ModelError {
    ModelError::ShapeMismatch(format!("{what}: {a:?} vs {b:?}"))
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ModelError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err("add", self.shape(a), self.shape(b)));
        }
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| p + q).collect();
        let value = Tensor::new(x.shape.clone(), data);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let x = self.value(a);
        let value = Tensor::new(x.shape.clone(), x.data.iter().map(|&v| v * s).collect());
        self.push(value, Op::Scale(a, s))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, ModelError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(shape_err("matmul_t", sa, sb));
        }
        let (n, k, m) = (sa[0], sa[1], sb[0]);
        let (x, y) = (&self.value(a).data, &self.value(b).data);
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            let row = &x[i * k..(i + 1) * k];
            for j in 0..m {
                // Sequential accumulation, matching the propagation kernel.
                let mut acc = T::zero();
                for (&p, &q) in y[j * k..(j + 1) * k].iter().zip(row) {
                    acc += p * q;
                }
                out[i * m + j] = acc;
            }
        }
        Ok(self.push(Tensor::new(vec![n, m], out), Op::MatMulT(a, b)))
    }

    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, ModelError> {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        if sa.len() != 2 || sb != [sa[1]] {
            return Err(shape_err("add_row_bias", sa, sb));
        }
        let m = sa[1];
        let b = &self.value(bias).data;
        let x = self.value(a);
        let data = x.data.iter().enumerate().map(|(i, &v)| v + b[i % m]).collect();
        let value = Tensor::new(x.shape.clone(), data);
        Ok(self.push(value, Op::AddRowBias(a, bias)))
    }

    pub fn scale_columns(&mut self, a: Var, d: Var) -> Result<Var, ModelError> {
        let (sa, sd) = (self.shape(a), self.shape(d));
        if sa.len() != 2 || sd != [sa[1]] {
            return Err(shape_err("scale_columns", sa, sd));
        }
        let m = sa[1];
        let dv = &self.value(d).data;
        let x = self.value(a);
        let data = x.data.iter().enumerate().map(|(i, &v)| v * dv[i % m]).collect();
        let value = Tensor::new(x.shape.clone(), data);
        Ok(self.push(value, Op::ScaleColumns(a, d)))
    }

    pub fn layer_norm(&mut self, a: Var, epsilon: T) -> Result<Var, ModelError> {
        let sa = self.shape(a);
        if sa.len() != 2 {
            return Err(ModelError::ShapeMismatch(format!("layer_norm needs [n, c], got {sa:?}")));
        }
        let (n, c) = (sa[0], sa[1]);
        let x = &self.value(a).data;
        let mut out = vec![T::zero(); n * c];
        let mut stats = Vec::with_capacity(n);
        for (row, o) in x.chunks(c).zip(out.chunks_mut(c)) {
            let ctx = normalize_into(row, epsilon, o);
            stats.push((ctx.std, ctx.std + epsilon));
        }
        Ok(self.push(Tensor::new(vec![n, c], out), Op::LayerNorm { x: a, stats }))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var, ModelError> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        if sx.len() != 4 || sw.len() != 4 || sw[1] != sx[1] || sw[2] != sw[3] || sb != [sw[0]] {
            return Err(shape_err("conv2d", sx, sw));
        }
        let g = ConvGeometry {
            in_channels: sx[1],
            height: sx[2],
            width: sx[3],
            kernel: sw[2],
            stride,
            pad,
        };
        if g.height + 2 * pad < g.kernel || g.width + 2 * pad < g.kernel {
            return Err(shape_err("conv2d kernel larger than input", sx, sw));
        }
        let (n, co) = (sx[0], sw[0]);
        let (patch, plane) = (g.patch(), g.out_plane());
        let in_len = g.in_channels * g.height * g.width;
        let (xd, wd, bd) = (&self.value(x).data, &self.value(w).data, &self.value(b).data);
        let mut out = vec![T::zero(); n * co * plane];
        let mut cols = vec![T::zero(); patch * plane];
        for s in 0..n {
            im2col(&xd[s * in_len..(s + 1) * in_len], &g, &mut cols);
            let os = &mut out[s * co * plane..(s + 1) * co * plane];
            for (o, orow) in os.chunks_mut(plane).enumerate() {
                orow.iter_mut().for_each(|v| *v = bd[o]);
            }
            gemm_nn(wd, &cols, os, co, patch, plane);
        }
        let value = Tensor::new(vec![n, co, g.out_height(), g.out_width()], out);
        Ok(self.push(value, Op::Conv2d { x, w, b, stride, pad }))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = x.data.iter().map(|&v| v * sigmoid(v)).collect();
        let value = Tensor::new(x.shape.clone(), data);
        self.push(value, Op::Silu(a))
    }

    /// Nearest-neighbour 2× upsampling of `[N, C, H, W]`.
    pub fn upsample2(&mut self, a: Var) -> Result<Var, ModelError> {
        let s = self.shape(a).to_vec();
        if s.len() != 4 {
            return Err(ModelError::ShapeMismatch(format!("upsample2 needs 4-D input, got {s:?}")));
        }
        let (h, w) = (s[2], s[3]);
        let x = &self.value(a).data;
        let mut out = Vec::with_capacity(x.len() * 4);
        for plane in x.chunks(h * w) {
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    out.push(plane[(y / 2) * w + xx / 2]);
                }
            }
        }
        let value = Tensor::new(vec![s[0], s[1], 2 * h, 2 * w], out);
        Ok(self.push(value, Op::Upsample2(a)))
    }

    pub fn mean_pool(&mut self, a: Var) -> Result<Var, ModelError> {
        let s = self.shape(a).to_vec();
        if s.len() != 4 {
            return Err(ModelError::ShapeMismatch(format!("mean_pool needs 4-D input, got {s:?}")));
        }
        let plane = s[2] * s[3];
        let inv = T::one() / T::from_f64_lossy(plane as f64);
        let data = self.value(a).data.chunks(plane).map(|p| p.iter().copied().sum::<T>() * inv).collect();
        Ok(self.push(Tensor::new(vec![s[0], s[1]], data), Op::MeanPool(a)))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, ModelError> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 || start + len > s[1] {
            return Err(ModelError::ShapeMismatch(format!("slice {start}+{len} of {s:?}")));
        }
        let x = &self.value(a).data;
        let data = x.chunks(s[1]).flat_map(|row| row[start..start + len].iter().copied()).collect();
        Ok(self.push(Tensor::new(vec![s[0], len], data), Op::SliceCols { x: a, start }))
    }

    pub fn assemble_map(&mut self, cells: Vec<Var>, height: usize, width: usize) -> Result<Var, ModelError> {
        if cells.len() != height * width || cells.is_empty() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} cells for a {width}x{height} map",
                cells.len()
            )));
        }
        let s0 = self.shape(cells[0]).to_vec();
        if s0.len() != 2 || cells.iter().any(|&c| self.shape(c) != s0.as_slice()) {
            return Err(ModelError::ShapeMismatch("map cells must share an [N, C] shape".into()));
        }
        let (n, c) = (s0[0], s0[1]);
        let plane = height * width;
        let mut out = vec![T::zero(); n * c * plane];
        for (pos, &cell) in cells.iter().enumerate() {
            for (i, &v) in self.value(cell).data.iter().enumerate() {
                let (s, k) = (i / c, i % c);
                out[(s * c + k) * plane + pos] = v;
            }
        }
        let value = Tensor::new(vec![n, c, height, width], out);
        Ok(self.push(value, Op::AssembleMap { cells, height, width }))
    }

    /// Mean squared error against `target`, over the entries selected by
    /// `mask` when given.
    pub fn mse(&mut self, a: Var, target: &Tensor<T>, mask: Option<Vec<bool>>) -> Result<Var, ModelError> {
        let x = self.value(a);
        if x.shape != target.shape {
            return Err(shape_err("mse", &x.shape, &target.shape));
        }
        if let Some(m) = &mask {
            if m.len() != x.len() {
                return Err(ModelError::ShapeMismatch(format!("mask of {} for {} values", m.len(), x.len())));
            }
        }
        let keep = |i: usize| mask.as_ref().is_none_or(|m| m[i]);
        let mut sum = T::zero();
        let mut count = 0usize;
        for (i, (&p, &q)) in x.data.iter().zip(&target.data).enumerate() {
            if keep(i) {
                let d = p - q;
                sum += d * d;
                count += 1;
            }
        }
        if count == 0 {
            return Err(ModelError::EmptyMask);
        }
        let value = Tensor::scalar(sum / T::from_f64_lossy(count as f64));
        Ok(self.push(
            value,
            Op::Mse {
                x: a,
                target: target.data.clone(),
                mask,
                count,
            },
        ))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, ModelError> {
        if loss.0 >= self.nodes.len() {
            return Err(ModelError::GraphNotEvaluated);
        }
        if self.value(loss).len() != 1 {
            return Err(ModelError::ShapeMismatch(format!(
                "backward needs a scalar, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let len_of = |v: Var| self.nodes[v.0].value.len();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); len_of(v)]);
            f(slot);
        };
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |d| axpy(T::one(), g, d));
                acc(*b, &mut |d| axpy(T::one(), g, d));
            }
            Op::Scale(a, s) => acc(*a, &mut |d| axpy(*s, g, d)),
            Op::MatMulT(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (n, k, m) = (sa[0], sa[1], sb[0]);
                let (x, y) = (&self.value(*a).data, &self.value(*b).data);
                acc(*a, &mut |d| {
                    for i in 0..n {
                        for j in 0..m {
                            axpy(g[i * m + j], &y[j * k..(j + 1) * k], &mut d[i * k..(i + 1) * k]);
                        }
                    }
                });
                acc(*b, &mut |d| {
                    for i in 0..n {
                        for j in 0..m {
                            axpy(g[i * m + j], &x[i * k..(i + 1) * k], &mut d[j * k..(j + 1) * k]);
                        }
                    }
                });
            }
            Op::AddRowBias(a, bias) => {
                let m = self.shape(*bias)[0];
                acc(*a, &mut |d| axpy(T::one(), g, d));
                acc(*bias, &mut |d| {
                    for row in g.chunks(m) {
                        axpy(T::one(), row, d);
                    }
                });
            }
            Op::ScaleColumns(a, dv) => {
                let m = self.shape(*dv)[0];
                let (x, s) = (&self.value(*a).data, &self.value(*dv).data);
                acc(*a, &mut |d| {
                    for (i, v) in d.iter_mut().enumerate() {
                        *v += g[i] * s[i % m];
                    }
                });
                acc(*dv, &mut |d| {
                    for (i, (&gi, &xi)) in g.iter().zip(x).enumerate() {
                        d[i % m] += gi * xi;
                    }
                });
            }
            Op::LayerNorm { x, stats } => {
                let c = self.shape(*x)[1];
                let cf = T::from_f64_lossy(c as f64);
                let y = &node.value.data;
                acc(*x, &mut |d| {
                    for (r, &(sigma, s)) in stats.iter().enumerate() {
                        let (gr, yr) = (&g[r * c..(r + 1) * c], &y[r * c..(r + 1) * c]);
                        let gmean = gr.iter().copied().sum::<T>() / cf;
                        // With d = x − μ = y·s:
                        // dx = (g − ḡ)/s − (Σ g·d)·d/(C·σ·s²) = (g − ḡ)/s − (Σ g·y)·y/(C·σ).
                        let k = if sigma > T::zero() {
                            gr.iter().zip(yr).map(|(&a, &b)| a * b).sum::<T>() / (cf * sigma)
                        } else {
                            T::zero()
                        };
                        let dr = &mut d[r * c..(r + 1) * c];
                        for i in 0..c {
                            dr[i] += (gr[i] - gmean) / s - k * yr[i];
                        }
                    }
                });
            }
            Op::Conv2d { x, w, b, stride, pad } => {
                let (sx, sw) = (self.shape(*x), self.shape(*w));
                let geo = ConvGeometry {
                    in_channels: sx[1],
                    height: sx[2],
                    width: sx[3],
                    kernel: sw[2],
                    stride: *stride,
                    pad: *pad,
                };
                let (n, co) = (sx[0], sw[0]);
                let (patch, plane) = (geo.patch(), geo.out_plane());
                let in_len = geo.in_channels * geo.height * geo.width;
                let (xd, wd) = (&self.value(*x).data, &self.value(*w).data);
                let mut dw = vec![T::zero(); co * patch];
                let mut dx = vec![T::zero(); n * in_len];
                let mut db = vec![T::zero(); co];
                let mut cols = vec![T::zero(); patch * plane];
                let mut dcols = vec![T::zero(); patch * plane];
                let wt: Vec<T> = (0..patch * co).map(|i| wd[(i % co) * patch + i / co]).collect();
                for s in 0..n {
                    im2col(&xd[s * in_len..(s + 1) * in_len], &geo, &mut cols);
                    let gs = &g[s * co * plane..(s + 1) * co * plane];
                    for o in 0..co {
                        db[o] += gs[o * plane..(o + 1) * plane].iter().copied().sum::<T>();
                    }
                    gemm_nt(gs, &cols, &mut dw, co, plane, patch);
                    dcols.iter_mut().for_each(|v| *v = T::zero());
                    gemm_nn(&wt, gs, &mut dcols, patch, co, plane);
                    col2im(&dcols, &geo, &mut dx[s * in_len..(s + 1) * in_len]);
                }
                acc(*x, &mut |d| axpy(T::one(), &dx, d));
                acc(*w, &mut |d| axpy(T::one(), &dw, d));
                acc(*b, &mut |d| axpy(T::one(), &db, d));
            }
            Op::Silu(a) => {
                let x = &self.value(*a).data;
                acc(*a, &mut |d| {
                    for ((o, &gi), &xi) in d.iter_mut().zip(g).zip(x) {
                        let s = sigmoid(xi);
                        *o += gi * s * (T::one() + xi * (T::one() - s));
                    }
                });
            }
            Op::Upsample2(a) => {
                let s = self.shape(*a);
                let (h, w) = (s[2], s[3]);
                acc(*a, &mut |d| {
                    for (dp, gp) in d.chunks_mut(h * w).zip(g.chunks(4 * h * w)) {
                        for y in 0..2 * h {
                            for xx in 0..2 * w {
                                dp[(y / 2) * w + xx / 2] += gp[y * 2 * w + xx];
                            }
                        }
                    }
                });
            }
            Op::MeanPool(a) => {
                let s = self.shape(*a);
                let plane = s[2] * s[3];
                let inv = T::one() / T::from_f64_lossy(plane as f64);
                acc(*a, &mut |d| {
                    for (dp, &gi) in d.chunks_mut(plane).zip(g) {
                        dp.iter_mut().for_each(|v| *v += gi * inv);
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let m = self.shape(*x)[1];
                let len = node.value.shape[1];
                acc(*x, &mut |d| {
                    for (dr, gr) in d.chunks_mut(m).zip(g.chunks(len)) {
                        axpy(T::one(), gr, &mut dr[*start..*start + len]);
                    }
                });
            }
            Op::AssembleMap { cells, height, width } => {
                let plane = height * width;
                let c = node.value.shape[1];
                for (pos, &cell) in cells.iter().enumerate() {
                    acc(cell, &mut |d| {
                        for (i, v) in d.iter_mut().enumerate() {
                            let (s, k) = (i / c, i % c);
                            *v += g[(s * c + k) * plane + pos];
                        }
                    });
                }
            }
            Op::Mse { x, target, mask, count } => {
                let xv = &self.value(*x).data;
                let scale = g[0] * T::from_f64_lossy(2.0) / T::from_f64_lossy(*count as f64);
                acc(*x, &mut |d| {
                    for (i, v) in d.iter_mut().enumerate() {
                        if mask.as_ref().is_none_or(|m| m[i]) {
                            *v += scale * (xv[i] - target[i]);
                        }
                    }
                });
            }
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
