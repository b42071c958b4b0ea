use crate::scalar::Scalar;

/// Per-position channel statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormContext<T> {
    pub mean: T,
    pub std: T,
}

/// Writes `(v − μ)/(σ + ε)` into `out`, with μ and the population σ taken
/// over the channels of `v`.
///
/// The mean is accumulated relative to `v[0]`, so a constant vector yields an
/// exactly zero numerator.
pub fn normalize_into<T: Scalar>(v: &[T], epsilon: T, out: &mut [T]) -> NormContext<T> {
    let c = T::from_usize(v.len()).expect("channel count fits the scalar type");
    let pivot = v[0];
    let shift = v.iter().map(|&x| x - pivot).sum::<T>() / c;
    let mean = pivot + shift;
    let mut var = T::zero();
    for (o, &x) in out.iter_mut().zip(v) {
        let d = (x - pivot) - shift;
        *o = d;
        var += d * d;
    }
    let std = (var / c).sqrt();
    let denom = std + epsilon;
    if denom > T::zero() {
        for o in out.iter_mut() {
            *o /= denom;
        }
    }
    NormContext { mean, std }
}

pub fn normalize_channels<T: Scalar>(v: &[T], epsilon: T) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    normalize_into(v, epsilon, &mut out);
    out
}
