use super::{require_len, AnalysisError};
use crate::image::Image;

/// Reported for identical inputs, where the ratio is unbounded.
pub const PSNR_CAP_DB: f64 = 99.0;

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    require_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(AnalysisError::InvalidArgument("empty input".into()));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

pub fn psnr_slices(a: &[f64], b: &[f64], peak: f64) -> Result<f64, AnalysisError> {
    if !(peak > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("peak must be positive, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / m).log10()).min(PSNR_CAP_DB))
}

pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64, AnalysisError> {
    a.require_same_shape(b)?;
    psnr_slices(a.as_slice(), b.as_slice(), peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_images_hit_cap() {
        let a = Image::filled(4, 4, 1, 0.3);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn unit_offset_at_8_bit_peak() {
        let a = Image::filled(5, 3, 3, 10.0);
        let b = Image::filled(5, 3, 3, 11.0);
        let got = psnr(&a, &b, 255.0).unwrap();
        assert!((got - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((got - 48.13).abs() < 0.01);
    }

    #[test]
    fn seeded_pair_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Image::from_fn(6, 5, 2, |_, _, _| rng.gen());
        let b = Image::from_fn(6, 5, 2, |_, _, _| rng.gen());
        let mut sum = 0.0;
        for y in 0..5 {
            for x in 0..6 {
                for c in 0..2 {
                    let d = a.get(x, y, c) - b.get(x, y, c);
                    sum += d * d;
                }
            }
        }
        let want = 10.0 * (1.0 / (sum / 60.0)).log10();
        assert!((psnr(&a, &b, 1.0).unwrap() - want).abs() < 1e-12);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn shape_and_peak_checked() {
        let a = Image::filled(2, 2, 1, 0.0);
        let b = Image::filled(2, 3, 1, 0.0);
        assert!(matches!(psnr(&a, &b, 1.0), Err(AnalysisError::Image(_))));
        assert!(psnr(&a, &a, 0.0).is_err());
    }
}
