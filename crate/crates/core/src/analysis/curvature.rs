use crate::finola::FeatureMap;
use crate::scalar::Scalar;

/// Per-channel Gaussian curvature of the surfaces `zₖ(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    pub width: usize,
    pub height: usize,
    /// One row-major plane per channel.
    pub kappa: Vec<Vec<f64>>,
    /// RMS of each channel's peak positive and peak negative curvature.
    pub scores: Vec<f64>,
    /// Channels sorted by descending score (ties by index).
    pub ranking: Vec<usize>,
}

impl CurvatureField {
    pub fn at(&self, k: usize, x: usize, y: usize) -> f64 {
        self.kappa[k][y * self.width + x]
    }
}

/// First derivative along a line: central inside, second-order one-sided at
/// the ends.
fn d1(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Second derivative; the end cells reuse the stencil of their neighbour.
fn d2(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let c = i.clamp(1, n - 2);
            (f[c - 1] - 2.0 * f[c] + f[c + 1]) / (h * h)
        })
        .collect()
}

fn along_x(plane: &[f64], w: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    plane.chunks(w).flat_map(|row| op(row)).collect()
}

fn along_y(plane: &[f64], w: usize, h: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for x in 0..w {
        let col: Vec<f64> = (0..h).map(|y| plane[y * w + x]).collect();
        for (y, v) in op(&col).into_iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    out
}

/// Curvature in grid units (unit spacing). Requires `W, H ≥ 3`.
pub fn gaussian_curvature<T: Scalar>(z: &FeatureMap<T>) -> CurvatureField {
    gaussian_curvature_with_spacing(z, 1.0)
}

/// `κ = (z_xx·z_yy − z_xy²) / (1 + z_x² + z_y²)²` with sample spacing `h`.
pub fn gaussian_curvature_with_spacing<T: Scalar>(z: &FeatureMap<T>, h: f64) -> CurvatureField {
    let (w, hh) = (z.width(), z.height());
    assert!(w >= 3 && hh >= 3, "curvature needs at least a 3x3 grid");
    let mut kappa = Vec::with_capacity(z.channels());
    for k in 0..z.channels() {
        let plane: Vec<f64> = z.channel_plane(k).iter().map(|v| v.to_f64_lossy()).collect();
        let zx = along_x(&plane, w, |r| d1(r, h));
        let zy = along_y(&plane, w, hh, |c| d1(c, h));
        let zxx = along_x(&plane, w, |r| d2(r, h));
        let zyy = along_y(&plane, w, hh, |c| d2(c, h));
        let zxy = along_y(&zx, w, hh, |c| d1(c, h));
        kappa.push(
            (0..w * hh)
                .map(|i| {
                    let g = 1.0 + zx[i] * zx[i] + zy[i] * zy[i];
                    (zxx[i] * zyy[i] - zxy[i] * zxy[i]) / (g * g)
                })
                .collect::<Vec<f64>>(),
        );
    }
    let scores: Vec<f64> = kappa
        .iter()
        .map(|plane| {
            let pos = plane.iter().copied().fold(0.0, f64::max);
            let neg = plane.iter().copied().fold(0.0, f64::min);
            ((pos * pos + neg * neg) / 2.0).sqrt()
        })
        .collect();
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    CurvatureField {
        width: w,
        height: hh,
        kappa,
        scores,
        ranking,
    }
}
