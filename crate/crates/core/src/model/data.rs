use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::psnr;
use crate::image::Image;

/// Grayscale images of a sinusoidal grating plus a Gaussian blob on a flat
/// background, clamped to `[0, 1]`.
pub fn synthetic_images(count: usize, width: usize, height: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let base = rng.gen_range(0.3..0.7);
            let amp = rng.gen_range(0.05..0.3);
            let fx = rng.gen_range(-2.0..2.0) / width as f64;
            let fy = rng.gen_range(-2.0..2.0) / height as f64;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let blob = rng.gen_range(-0.4..0.4);
            let cx = rng.gen_range(0.0..width as f64);
            let cy = rng.gen_range(0.0..height as f64);
            let sigma = rng.gen_range(1.5..4.0);
            Image::from_fn(width, height, 1, |x, y, _| {
                let (x, y) = (x as f64, y as f64);
                let wave = amp * (std::f64::consts::TAU * (fx * x + fy * y) + phase).sin();
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                (base + wave + blob * (-r2 / (2.0 * sigma * sigma)).exp()).clamp(0.0, 1.0)
            })
        })
        .collect()
}

/// Per-pixel mean of a non-empty set of equally shaped images.
pub fn mean_image(images: &[Image]) -> Image {
    let first = &images[0];
    let mut acc = vec![0.0; first.as_slice().len()];
    for img in images {
        for (a, v) in acc.iter_mut().zip(img.as_slice()) {
            *a += v;
        }
    }
    let n = images.len() as f64;
    let (w, h, c) = first.shape();
    Image::new(w, h, c, acc.into_iter().map(|v| v / n).collect()).expect("shape taken from the inputs")
}

/// Mean per-image PSNR (peak 1) of predicting every image by the mean image.
pub fn mean_image_baseline_psnr(images: &[Image]) -> f64 {
    let mean = mean_image(images);
    images.iter().map(|img| psnr(img, &mean, 1.0).expect("same shape")).sum::<f64>() / images.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let a = synthetic_images(8, 16, 16, 5);
        assert_eq!(a, synthetic_images(8, 16, 16, 5));
        assert_ne!(a, synthetic_images(8, 16, 16, 6));
        assert!(a.iter().flat_map(|i| i.as_slice()).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn baseline_of_identical_images_is_capped() {
        let imgs = vec![Image::filled(4, 4, 1, 0.2); 3];
        assert_eq!(mean_image_baseline_psnr(&imgs), crate::analysis::PSNR_CAP_DB);
    }
}
