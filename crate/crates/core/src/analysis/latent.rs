use super::{require_len, AnalysisError};
use crate::linalg::{eig_symmetric, Matrix};

/// `α·q₁ + (1 − α)·q₂`.
pub fn latent_interpolate(q1: &[f64], q2: &[f64], alpha: f64) -> Result<Vec<f64>, AnalysisError> {
    require_len(q1.len(), q2.len())?;
    Ok(q1.iter().zip(q2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect())
}

pub fn latent_mean(latents: &[Vec<f64>]) -> Result<Vec<f64>, AnalysisError> {
    let first = latents
        .first()
        .ok_or_else(|| AnalysisError::InvalidArgument("no latents".into()))?;
    let mut sum = vec![0.0; first.len()];
    for v in latents {
        require_len(first.len(), v.len())?;
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = latents.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Principal axes of a latent sample and its rank-K reconstructions.
#[derive(Clone, Debug)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Sample-covariance eigenvalues, descending.
    pub variances: Vec<f64>,
    /// Top-K unit eigenvectors.
    pub components: Vec<Vec<f64>>,
    pub reconstructions: Vec<Vec<f64>>,
}

pub fn latent_pca(latents: &[Vec<f64>], k: usize) -> Result<Pca, AnalysisError> {
    if latents.len() < 2 {
        return Err(AnalysisError::InvalidArgument("PCA needs at least two samples".into()));
    }
    let mean = latent_mean(latents)?;
    let d = mean.len();
    if k == 0 || k > d {
        return Err(AnalysisError::InvalidArgument(format!("K must be in 1..={d}, got {k}")));
    }
    let centred: Vec<Vec<f64>> = latents
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let denom = (latents.len() - 1) as f64;
    let cov = Matrix::from_fn(d, d, |i, j| centred.iter().map(|v| v[i] * v[j]).sum::<f64>() / denom);
    let (variances, vectors) = eig_symmetric(&cov)?;
    let components: Vec<Vec<f64>> = (0..k).map(|j| vectors.column(j)).collect();
    let reconstructions = centred
        .iter()
        .map(|v| {
            let mut out = mean.clone();
            for comp in &components {
                let coef: f64 = comp.iter().zip(v).map(|(a, b)| a * b).sum();
                for (o, c) in out.iter_mut().zip(comp) {
                    *o += coef * c;
                }
            }
            out
        })
        .collect();
    Ok(Pca {
        mean,
        variances,
        components,
        reconstructions,
    })
}
