use super::{require_len, AnalysisError};
use crate::finola::LatentSet;

/// Per-channel uniform quantizer: `bits` per value over `[min_k, max_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantSpec {
    bits: u32,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl QuantSpec {
    pub fn new(bits: u32, min: Vec<f64>, max: Vec<f64>) -> Result<Self, AnalysisError> {
        if !(1..=16).contains(&bits) {
            return Err(AnalysisError::InvalidArgument(format!("bits must be in 1..=16, got {bits}")));
        }
        require_len(min.len(), max.len())?;
        if let Some(k) = min.iter().zip(&max).position(|(lo, hi)| !(hi > lo)) {
            return Err(AnalysisError::InvalidArgument(format!(
                "channel {k}: range [{}, {}] is empty",
                min[k], max[k]
            )));
        }
        Ok(Self { bits, min, max })
    }

    /// Ranges spanning every value of every path in `sets`. A channel that
    /// never varies gets a unit-width range starting at its value.
    pub fn fit(bits: u32, sets: &[LatentSet<f64>]) -> Result<Self, AnalysisError> {
        let c = sets.first().map_or(0, LatentSet::channels);
        if c == 0 {
            return Err(AnalysisError::InvalidArgument("no latents to fit".into()));
        }
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for v in sets.iter().flat_map(|s| &s.vectors) {
            require_len(c, v.len())?;
            for (k, &x) in v.iter().enumerate() {
                min[k] = min[k].min(x);
                max[k] = max[k].max(x);
            }
        }
        for (lo, hi) in min.iter().zip(max.iter_mut()) {
            if !(*hi > *lo) {
                *hi = *lo + 1.0;
            }
        }
        Self::new(bits, min, max)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    pub fn step(&self, k: usize) -> f64 {
        (self.max[k] - self.min[k]) / self.levels() as f64
    }

    pub fn range(&self, k: usize) -> (f64, f64) {
        (self.min[k], self.max[k])
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    /// One code vector per path.
    pub codes: Vec<Vec<u32>>,
    pub dequantized: LatentSet<f64>,
    pub bits_per_pixel: f64,
}

pub fn dequantize(codes: &[Vec<u32>], spec: &QuantSpec) -> Vec<Vec<f64>> {
    codes
        .iter()
        .map(|path| {
            path.iter()
                .enumerate()
                .map(|(k, &code)| spec.min[k] + code as f64 * spec.step(k))
                .collect()
        })
        .collect()
}

/// Values outside a channel's range are clamped before coding.
pub fn quantize_uniform(
    latents: &LatentSet<f64>,
    spec: &QuantSpec,
    image_width: usize,
    image_height: usize,
) -> Result<Quantized, AnalysisError> {
    let levels = spec.levels();
    let mut codes = Vec::with_capacity(latents.paths());
    for v in &latents.vectors {
        require_len(spec.channels(), v.len())?;
        codes.push(
            v.iter()
                .enumerate()
                .map(|(k, &x)| {
                    let t = (x.clamp(spec.min[k], spec.max[k]) - spec.min[k]) / spec.step(k);
                    (t.round() as u32).min(levels)
                })
                .collect(),
        );
    }
    let dequantized = LatentSet::with_positions(dequantize(&codes, spec), latents.positions.clone())
        .expect("positions copied from input");
    let total_bits = (latents.paths() * spec.channels()) as f64 * spec.bits as f64;
    Ok(Quantized {
        codes,
        dequantized,
        bits_per_pixel: total_bits / (image_width * image_height) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_aligned_values_round_trip() {
        let spec = QuantSpec::new(8, vec![0.0; 4], vec![255.0; 4]).unwrap();
        let set = LatentSet::single(vec![0.0, 17.0, 128.0, 255.0]);
        let q = quantize_uniform(&set, &spec, 16, 16).unwrap();
        assert_eq!(q.dequantized, set);
        assert_eq!(q.codes[0], vec![0, 17, 128, 255]);
    }

    #[test]
    fn one_bit_has_two_levels() {
        let spec = QuantSpec::new(1, vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = LatentSet::centered((0..5).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect());
        let q = quantize_uniform(&set, &spec, 8, 8).unwrap();
        for v in q.dequantized.vectors.iter().flatten() {
            assert!(*v == -1.0 || *v == 1.0);
        }
    }

    #[test]
    fn error_bounded_by_half_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sets: Vec<_> = (0..20)
            .map(|_| LatentSet::centered((0..4).map(|_| (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()))
            .collect();
        let spec = QuantSpec::fit(8, &sets).unwrap();
        for set in &sets {
            let q = quantize_uniform(set, &spec, 16, 16).unwrap();
            assert_eq!(q.bits_per_pixel, 4.0 * 16.0 * 8.0 / 256.0);
            for (a, b) in set.vectors.iter().zip(&q.dequantized.vectors) {
                for (k, (x, y)) in a.iter().zip(b).enumerate() {
                    assert!((x - y).abs() <= spec.step(k) / 2.0 * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuantSpec::new(0, vec![0.0], vec![1.0]).is_err());
        assert!(QuantSpec::new(17, vec![0.0], vec![1.0]).is_err());
        assert!(QuantSpec::new(8, vec![1.0], vec![1.0]).is_err());
    }
}
