//! Latent one-way wave view of a trained propagation.
//!
//! With `Q = A·B⁻¹ = V·Λ·V⁻¹`, the projected map `ζ = V⁻¹·z` obeys
//! `Δx ζₖ = λₖ·Δy ζₖ` channel by channel wherever the single-path
//! recursion supplies both differences. Each path can also be propagated
//! directly in ζ-space with `H_A = V⁻¹A`, `H_B = V⁻¹B` and a transformed
//! normalization.

use num_complex::Complex64;
use thiserror::Error;

use crate::finola::{Direction, FeatureMap, FinolaError, FinolaParams, Position, ScanOrder};
use crate::linalg::{self, eig_real_nonsymmetric, EigenDecomposition, LinalgError, Matrix};
use crate::scalar::Scalar;

/// Largest accepted `‖QV − VΛ‖_F/‖Q‖_F` for a basis.
pub const BASIS_EIGEN_TOLERANCE: f64 = 1e-6;
/// Largest accepted `‖V·V⁻¹ − I‖_∞` for a basis.
pub const BASIS_INVERSE_TOLERANCE: f64 = 1e-8;

/// Relative size below which the transformed normalization's quadratic form
/// is treated as zero (a constant vector in z-space).
const DEGENERATE_RATIO: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Propagation(#[from] FinolaError),
    #[error("wave basis check failed: {what} = {value:e} exceeds {limit:e}")]
    InaccurateBasis {
        what: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("transformed normalization is degenerate (quadratic form {form:e})")]
    DegenerateDenominator { form: f64 },
    #[error("beta[{index}] is zero, wave speed undefined")]
    ZeroBeta { index: usize },
    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
}

/// `Q`, its eigendecomposition and the ζ-space direction matrices.
#[derive(Clone, Debug)]
pub struct WaveBasis {
    pub q: Matrix<f64>,
    pub eig: EigenDecomposition,
    pub v_inv: Matrix<Complex64>,
    pub h_a: Matrix<Complex64>,
    pub h_b: Matrix<Complex64>,
    pub h_a_minus: Matrix<Complex64>,
    pub h_b_minus: Matrix<Complex64>,
    pub epsilon: f64,
}

impl WaveBasis {
    pub fn channels(&self) -> usize {
        self.q.rows()
    }

    /// Latent speeds λₖ.
    pub fn speeds(&self) -> &[Complex64] {
        &self.eig.values
    }

    pub fn v(&self) -> &Matrix<Complex64> {
        &self.eig.vectors
    }

    fn h(&self, dir: Direction) -> &Matrix<Complex64> {
        match dir {
            Direction::Right => &self.h_a,
            Direction::Left => &self.h_a_minus,
            Direction::Down => &self.h_b,
            Direction::Up => &self.h_b_minus,
        }
    }
}

pub fn build_wave_basis<T: Scalar>(p: &FinolaParams<T>) -> Result<WaveBasis, WaveError> {
    let p = p.to_f64();
    let b_inv = linalg::invert(&p.b)?;
    let q = p.a.matmul(&b_inv)?;
    let eig = eig_real_nonsymmetric(&q)?;
    if eig.residual > BASIS_EIGEN_TOLERANCE {
        return Err(WaveError::InaccurateBasis {
            what: "eigen residual",
            value: eig.residual,
            limit: BASIS_EIGEN_TOLERANCE,
        });
    }
    let v_inv = linalg::complex_invert(&eig.vectors)?;
    let n = q.rows();
    let inverse_error = eig
        .vectors
        .matmul(&v_inv)?
        .sub(&Matrix::identity(n))?
        .norm_inf();
    if inverse_error > BASIS_INVERSE_TOLERANCE {
        return Err(WaveError::InaccurateBasis {
            what: "inverse residual",
            value: inverse_error,
            limit: BASIS_INVERSE_TOLERANCE,
        });
    }
    let project = |m: &Matrix<f64>| v_inv.matmul(&m.to_complex());
    Ok(WaveBasis {
        h_a: project(&p.a)?,
        h_b: project(&p.b)?,
        h_a_minus: project(&p.a_minus)?,
        h_b_minus: project(&p.b_minus)?,
        q,
        eig,
        v_inv,
        epsilon: p.epsilon,
    })
}

fn apply_per_cell(
    map: &FeatureMap<Complex64>,
    m: &Matrix<Complex64>,
) -> Result<FeatureMap<Complex64>, WaveError> {
    let c = m.cols();
    if map.channels() != c {
        return Err(WaveError::ChannelMismatch {
            expected: c,
            found: map.channels(),
        });
    }
    let mut data = Vec::with_capacity(map.as_slice().len());
    for cell in map.as_slice().chunks(c) {
        data.extend(m.matvec(cell)?);
    }
    Ok(FeatureMap::from_vec(map.width(), map.height(), c, data)?)
}

/// `ζ(x, y) = V⁻¹·z(x, y)` at every position.
pub fn project_map<T: Scalar>(z: &FeatureMap<T>, basis: &WaveBasis) -> Result<FeatureMap<Complex64>, WaveError> {
    let zc = z.map(|v| Complex64::new(v.to_f64_lossy(), 0.0));
    apply_per_cell(&zc, &basis.v_inv)
}

/// `z(x, y) = V·ζ(x, y)` at every position.
pub fn unproject_map(zeta: &FeatureMap<Complex64>, basis: &WaveBasis) -> Result<FeatureMap<Complex64>, WaveError> {
    apply_per_cell(zeta, basis.v())
}

/// ζ-space counterpart of channel normalization:
/// `(CI − J)·Vψ / (√(ψᵀVᵀ(CI − J)Vψ) + C·ε)`.
///
/// The quadratic form uses the plain (unconjugated) transpose. For
/// `ψ = V⁻¹φ` with real `φ` it equals `C²σ_φ²`, so the result coincides with
/// `normalize_channels(φ, ε)`.
pub fn transformed_normalize(psi: &[Complex64], basis: &WaveBasis) -> Result<Vec<Complex64>, WaveError> {
    let c = basis.channels();
    if psi.len() != c {
        return Err(WaveError::ChannelMismatch {
            expected: c,
            found: psi.len(),
        });
    }
    let phi = basis.v().matvec(psi)?;
    let cf = c as f64;
    let sum: Complex64 = phi.iter().sum();
    let numerator: Vec<Complex64> = phi.iter().map(|&v| v * cf - sum).collect();
    // ψᵀVᵀ(CI − J)Vψ = Σ nₖ²/C with nₖ = Cφₖ − Σφ; summing squares of the
    // centred numerator avoids the cancellation in CΣφ² − (Σφ)².
    let form: Complex64 = numerator.iter().map(|&v| v * v).sum::<Complex64>() / cf;
    let scale: f64 = cf * phi.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let guard = cf * basis.epsilon;
    if form.norm() <= (DEGENERATE_RATIO * scale).max(guard * guard) {
        return Err(WaveError::DegenerateDenominator { form: form.norm() });
    }
    let denom = form.sqrt() + guard;
    Ok(numerator.into_iter().map(|v| v / denom).collect())
}

fn projected_step(psi: &[Complex64], dir: Direction, basis: &WaveBasis) -> Result<Vec<Complex64>, WaveError> {
    let hat = transformed_normalize(psi, basis)?;
    let delta = basis.h(dir).matvec(&hat)?;
    Ok(psi.iter().zip(delta).map(|(&a, d)| a + d).collect())
}

fn scan_projected(
    seed: &[Complex64],
    origin: (usize, usize),
    basis: &WaveBasis,
    width: usize,
    height: usize,
    horizontal_first: bool,
) -> Result<FeatureMap<Complex64>, WaveError> {
    let (x0, y0) = origin;
    let mut map = FeatureMap::zeros(width, height, seed.len())?;
    map.set_cell(x0, y0, seed);
    let row = |map: &mut FeatureMap<Complex64>, y: usize| -> Result<(), WaveError> {
        for x in x0 + 1..width {
            let next = projected_step(map.cell(x - 1, y), Direction::Right, basis)?;
            map.set_cell(x, y, &next);
        }
        for x in (0..x0).rev() {
            let next = projected_step(map.cell(x + 1, y), Direction::Left, basis)?;
            map.set_cell(x, y, &next);
        }
        Ok(())
    };
    let column = |map: &mut FeatureMap<Complex64>, x: usize| -> Result<(), WaveError> {
        for y in y0 + 1..height {
            let next = projected_step(map.cell(x, y - 1), Direction::Down, basis)?;
            map.set_cell(x, y, &next);
        }
        for y in (0..y0).rev() {
            let next = projected_step(map.cell(x, y + 1), Direction::Up, basis)?;
            map.set_cell(x, y, &next);
        }
        Ok(())
    };
    if horizontal_first {
        row(&mut map, y0)?;
        for x in 0..width {
            column(&mut map, x)?;
        }
    } else {
        column(&mut map, x0)?;
        for y in 0..height {
            row(&mut map, y)?;
        }
    }
    Ok(map)
}

/// Propagates `ψ = V⁻¹q` directly in ζ-space with `Δψ = H·ψ̂`.
pub fn propagate_projected<T: Scalar>(
    q: &[T],
    origin: Position,
    basis: &WaveBasis,
    width: usize,
    height: usize,
    order: ScanOrder,
) -> Result<FeatureMap<Complex64>, WaveError> {
    let c = basis.channels();
    if q.len() != c {
        return Err(WaveError::ChannelMismatch {
            expected: c,
            found: q.len(),
        });
    }
    let origin = origin.resolve(width, height)?;
    let qc: Vec<Complex64> = q.iter().map(|v| Complex64::new(v.to_f64_lossy(), 0.0)).collect();
    let seed = basis.v_inv.matvec(&qc)?;
    match order {
        ScanOrder::HorizontalFirst => scan_projected(&seed, origin, basis, width, height, true),
        ScanOrder::VerticalFirst => scan_projected(&seed, origin, basis, width, height, false),
        ScanOrder::Averaged => {
            let h = scan_projected(&seed, origin, basis, width, height, true)?;
            let v = scan_projected(&seed, origin, basis, width, height, false)?;
            let data = h
                .as_slice()
                .iter()
                .zip(v.as_slice())
                .map(|(&a, &b)| (a + b) * 0.5)
                .collect();
            Ok(FeatureMap::from_vec(width, height, c, data)?)
        }
    }
}

/// Cells where a horizontal-first single-path map has both one-step forward
/// differences produced by generation steps: the seed row from the origin
/// rightwards, provided a row exists below it.
pub fn generation_step_mask(width: usize, height: usize, origin: Position) -> Result<Vec<bool>, WaveError> {
    let (x0, y0) = origin.resolve(width, height)?;
    let mut mask = vec![false; width * height];
    if y0 + 1 < height {
        for x in x0..width.saturating_sub(1) {
            mask[y0 * width + x] = true;
        }
    }
    Ok(mask)
}

/// Max and mean of a per-entry residual over two cell populations.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub masked_max: f64,
    pub masked_mean: f64,
    pub masked_cells: usize,
    pub all_max: f64,
    pub all_mean: f64,
    pub all_cells: usize,
}

fn residual_report<E: Copy>(
    map: &FeatureMap<E>,
    mask: &[bool],
    mut entry: impl FnMut(&[E], &[E], &[E]) -> Vec<f64>,
) -> ResidualReport {
    let (w, h) = (map.width(), map.height());
    let mut report = ResidualReport {
        masked_max: 0.0,
        masked_mean: 0.0,
        masked_cells: 0,
        all_max: 0.0,
        all_mean: 0.0,
        all_cells: 0,
    };
    let (mut masked_sum, mut masked_n, mut all_sum, mut all_n) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let r = entry(map.cell(x, y), map.cell(x + 1, y), map.cell(x, y + 1));
            let cell_max = r.iter().copied().fold(0.0, f64::max);
            let cell_sum: f64 = r.iter().sum();
            report.all_cells += 1;
            report.all_max = report.all_max.max(cell_max);
            all_sum += cell_sum;
            all_n += r.len();
            if mask.get(y * w + x).copied().unwrap_or(false) {
                report.masked_cells += 1;
                report.masked_max = report.masked_max.max(cell_max);
                masked_sum += cell_sum;
                masked_n += r.len();
            }
        }
    }
    if masked_n > 0 {
        report.masked_mean = masked_sum / masked_n as f64;
    }
    if all_n > 0 {
        report.all_mean = all_sum / all_n as f64;
    }
    report
}

/// `|Δx ζₖ − λₖ·Δy ζₖ|` over the masked cells and over every cell with both
/// forward neighbours.
pub fn wave_residual(zeta: &FeatureMap<Complex64>, speeds: &[Complex64], mask: &[bool]) -> ResidualReport {
    residual_report(zeta, mask, |here, right, below| {
        here.iter()
            .zip(right)
            .zip(below)
            .zip(speeds)
            .map(|(((&c, &r), &b), &l)| ((r - c) - l * (b - c)).norm())
            .collect()
    })
}

/// `|Δx z − Q·Δy z|` per channel, the z-space form of the same relation.
pub fn pde_residual<T: Scalar>(z: &FeatureMap<T>, q: &Matrix<f64>, mask: &[bool]) -> ResidualReport {
    residual_report(z, mask, |here, right, below| {
        let dy: Vec<f64> = below.iter().zip(here).map(|(&b, &c)| (b - c).to_f64_lossy()).collect();
        let qdy = q.matvec(&dy).expect("channel count matches Q");
        right
            .iter()
            .zip(here)
            .zip(qdy)
            .map(|((&r, &c), v)| ((r - c).to_f64_lossy() - v).abs())
            .collect()
    })
}

/// How the direction matrices are tied to wave speeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SpeedMode {
    /// A, B, A⁻, B⁻ free; speeds are generally complex.
    #[default]
    ComplexFree,
    /// `A = P·diag(α)`, `B = P·diag(β)`; speeds `αₖ/βₖ`.
    RealSpeed,
    /// `A = B = P`; every speed is one.
    AllOne,
}

impl std::str::FromStr for SpeedMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complex_free" | "complex" => Ok(Self::ComplexFree),
            "real_speed" | "real" => Ok(Self::RealSpeed),
            "all_one" => Ok(Self::AllOne),
            other => Err(format!("unknown constraint mode `{other}`")),
        }
    }
}

impl std::fmt::Display for SpeedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ComplexFree => "complex_free",
            Self::RealSpeed => "real_speed",
            Self::AllOne => "all_one",
        })
    }
}

/// Constrained parameterizations of the direction matrices. The reverse
/// directions reuse the forward matrices.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstrainedParams<T> {
    RealSpeed { p: Matrix<T>, alpha: Vec<T>, beta: Vec<T> },
    AllOne { p: Matrix<T> },
}

impl<T: Scalar> ConstrainedParams<T> {
    pub fn mode(&self) -> SpeedMode {
        match self {
            Self::RealSpeed { .. } => SpeedMode::RealSpeed,
            Self::AllOne { .. } => SpeedMode::AllOne,
        }
    }
}

pub fn materialize_constrained<T: Scalar>(
    c: &ConstrainedParams<T>,
    epsilon: T,
) -> Result<FinolaParams<T>, WaveError> {
    match c {
        ConstrainedParams::RealSpeed { p, alpha, beta } => {
            let n = p.rows();
            for v in [alpha, beta] {
                if v.len() != n || !p.is_square() {
                    return Err(WaveError::ChannelMismatch {
                        expected: n,
                        found: v.len(),
                    });
                }
            }
            if let Some(index) = beta.iter().position(|b| *b == T::zero()) {
                return Err(WaveError::ZeroBeta { index });
            }
            let scale_cols = |d: &[T]| Matrix::from_fn(n, n, |i, j| p[(i, j)] * d[j]);
            let a = scale_cols(alpha);
            let b = scale_cols(beta);
            Ok(FinolaParams::symmetric(a, b, epsilon)?)
        }
        ConstrainedParams::AllOne { p } => Ok(FinolaParams::symmetric(p.clone(), p.clone(), epsilon)?),
    }
}
