//! Norm+linear autoregressive propagation of a latent vector over a 2-D grid.

mod norm;
mod parallel;
mod propagate;

use num_traits::Zero;
use rand::Rng;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use norm::{normalize_channels, normalize_into, NormContext};
pub use parallel::propagate_parallel;
pub use propagate::{multipath_propagate, propagate, step, step_into};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinolaError {
    #[error("position ({x}, {y}) outside {width}x{height} grid")]
    PositionOutOfRange {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("grid dimensions must be at least 1, got {width}x{height}x{channels}")]
    EmptyGrid {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("latent set has no paths")]
    NoPaths,
    #[error("data length {found} does not match {expected}")]
    DataLength { expected: usize, found: usize },
}

/// W×H grid of C-channel vectors, row-major with channels innermost:
/// cell `(x, y)` occupies `data[(y·W + x)·C ..][..C]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<E> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<E>,
}

impl<E: Copy + Zero> FeatureMap<E> {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self, FinolaError> {
        check_dims(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![E::zero(); width * height * channels],
        })
    }

    pub fn constant(width: usize, height: usize, value: &[E]) -> Result<Self, FinolaError> {
        let mut map = Self::zeros(width, height, value.len())?;
        for cell in map.data.chunks_mut(value.len()) {
            cell.copy_from_slice(value);
        }
        Ok(map)
    }
}

impl<E: Copy> FeatureMap<E> {
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<E>) -> Result<Self, FinolaError> {
        check_dims(width, height, channels)?;
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(FinolaError::DataLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<E> {
        self.data
    }

    fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * self.channels
    }

    pub fn cell(&self, x: usize, y: usize) -> &[E] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels]
    }

    pub fn cell_mut(&mut self, x: usize, y: usize) -> &mut [E] {
        let o = self.offset(x, y);
        &mut self.data[o..o + self.channels]
    }

    pub fn set_cell(&mut self, x: usize, y: usize, value: &[E]) {
        self.cell_mut(x, y).copy_from_slice(value);
    }

    /// Channel `k` as a row-major W×H plane.
    pub fn channel_plane(&self, k: usize) -> Vec<E> {
        self.data.iter().skip(k).step_by(self.channels).copied().collect()
    }

    pub fn map<F: Copy>(&self, f: impl Fn(E) -> F) -> FeatureMap<F> {
        FeatureMap {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rectangular sub-window starting at `(x0, y0)`.
    pub fn window(&self, x0: usize, y0: usize, width: usize, height: usize) -> FeatureMap<E> {
        let mut data = Vec::with_capacity(width * height * self.channels);
        for y in y0..y0 + height {
            for x in x0..x0 + width {
                data.extend_from_slice(self.cell(x, y));
            }
        }
        FeatureMap {
            width,
            height,
            channels: self.channels,
            data,
        }
    }
}

impl<T: Scalar> FeatureMap<T> {
    pub fn cast<U: Scalar>(&self) -> FeatureMap<U> {
        self.map(|v| U::from_f64_lossy(v.to_f64_lossy()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<(), FinolaError> {
    if width == 0 || height == 0 || channels == 0 {
        return Err(FinolaError::EmptyGrid {
            width,
            height,
            channels,
        });
    }
    Ok(())
}

/// Propagation direction and its matrix: right → A, left → A⁻, down → B, up → B⁻.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Right,
    Left,
    Down,
    Up,
}

/// Which axis is regressed first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScanOrder {
    /// Seed row first, then every column.
    HorizontalFirst,
    /// Seed column first, then every row.
    VerticalFirst,
    /// Elementwise mean of the two orderings.
    #[default]
    Averaged,
}

impl std::str::FromStr for ScanOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "h_first" | "horizontal" => Ok(Self::HorizontalFirst),
            "v_first" | "vertical" => Ok(Self::VerticalFirst),
            "averaged" => Ok(Self::Averaged),
            other => Err(format!("unknown ordering `{other}`")),
        }
    }
}

impl std::fmt::Display for ScanOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::HorizontalFirst => "h_first",
            Self::VerticalFirst => "v_first",
            Self::Averaged => "averaged",
        })
    }
}

/// The four direction matrices plus the normalization guard.
#[derive(Clone, Debug, PartialEq)]
pub struct FinolaParams<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub a_minus: Matrix<T>,
    pub b_minus: Matrix<T>,
    pub epsilon: T,
}

impl<T: Scalar> FinolaParams<T> {
    pub fn new(
        a: Matrix<T>,
        b: Matrix<T>,
        a_minus: Matrix<T>,
        b_minus: Matrix<T>,
        epsilon: T,
    ) -> Result<Self, FinolaError> {
        let c = a.rows();
        for m in [&a, &b, &a_minus, &b_minus] {
            if m.rows() != c || m.cols() != c {
                return Err(FinolaError::ChannelMismatch {
                    expected: c,
                    found: if m.rows() != c { m.rows() } else { m.cols() },
                });
            }
        }
        if c == 0 {
            return Err(FinolaError::EmptyGrid {
                width: 1,
                height: 1,
                channels: 0,
            });
        }
        Ok(Self {
            a,
            b,
            a_minus,
            b_minus,
            epsilon,
        })
    }

    /// Same matrix for the forward and reverse direction on each axis.
    pub fn symmetric(a: Matrix<T>, b: Matrix<T>, epsilon: T) -> Result<Self, FinolaError> {
        Self::new(a.clone(), b.clone(), a, b, epsilon)
    }

    pub fn zeros(channels: usize) -> Self {
        let z = Matrix::zeros(channels, channels);
        Self {
            a: z.clone(),
            b: z.clone(),
            a_minus: z.clone(),
            b_minus: z,
            epsilon: T::default_epsilon(),
        }
    }

    /// Entries drawn from uniform(−1/√C, 1/√C).
    pub fn random<R: Rng>(channels: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (channels as f64).sqrt();
        let mut draw = || {
            Matrix::from_fn(channels, channels, |_, _| {
                T::from_f64_lossy(rng.gen_range(-bound..bound))
            })
        };
        Self {
            a: draw(),
            b: draw(),
            a_minus: draw(),
            b_minus: draw(),
            epsilon: T::default_epsilon(),
        }
    }

    pub fn channels(&self) -> usize {
        self.a.rows()
    }

    pub fn matrix(&self, dir: Direction) -> &Matrix<T> {
        match dir {
            Direction::Right => &self.a,
            Direction::Left => &self.a_minus,
            Direction::Down => &self.b,
            Direction::Up => &self.b_minus,
        }
    }

    pub fn to_f64(&self) -> FinolaParams<f64> {
        FinolaParams {
            a: self.a.to_f64(),
            b: self.b.to_f64(),
            a_minus: self.a_minus.to_f64(),
            b_minus: self.b_minus.to_f64(),
            epsilon: self.epsilon.to_f64_lossy(),
        }
    }
}

/// Where a path's initial condition is placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Position {
    /// `(⌊W/2⌋, ⌊H/2⌋)`.
    #[default]
    Center,
    At(usize, usize),
}

impl Position {
    pub fn resolve(self, width: usize, height: usize) -> Result<(usize, usize), FinolaError> {
        let (x, y) = match self {
            Position::Center => (width / 2, height / 2),
            Position::At(x, y) => (x, y),
        };
        if x >= width || y >= height {
            return Err(FinolaError::PositionOutOfRange { x, y, width, height });
        }
        Ok((x, y))
    }
}

/// Positions spread uniformly over a `g×g` lattice (`g = ⌈√M⌉`), one per
/// lattice cell center, filled row by row.
pub fn scattered_positions(paths: usize, width: usize, height: usize) -> Vec<Position> {
    let g = (paths as f64).sqrt().ceil().max(1.0) as usize;
    (0..paths)
        .map(|i| {
            let (gx, gy) = (i % g, i / g);
            Position::At(
                ((2 * gx + 1) * width) / (2 * g),
                ((2 * gy + 1) * height) / (2 * g),
            )
        })
        .collect()
}

/// How the M initial conditions of a multi-path map are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Placement {
    /// Every path at the grid center.
    #[default]
    Center,
    /// [`scattered_positions`].
    Scattered,
}

impl Placement {
    pub fn positions(self, paths: usize, width: usize, height: usize) -> Vec<Position> {
        match self {
            Placement::Center => vec![Position::Center; paths],
            Placement::Scattered => scattered_positions(paths, width, height),
        }
    }
}

impl std::str::FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "center" => Ok(Self::Center),
            "scattered" => Ok(Self::Scattered),
            other => Err(format!("unknown placement `{other}`")),
        }
    }
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Center => "center",
            Self::Scattered => "scattered",
        })
    }
}

/// M initial-condition vectors with their placements.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSet<T> {
    pub vectors: Vec<Vec<T>>,
    pub positions: Vec<Position>,
}

impl<T: Scalar> LatentSet<T> {
    /// All paths at the grid center.
    pub fn centered(vectors: Vec<Vec<T>>) -> Self {
        let positions = vec![Position::Center; vectors.len()];
        Self { vectors, positions }
    }

    pub fn single(q: Vec<T>) -> Self {
        Self::centered(vec![q])
    }

    pub fn with_positions(vectors: Vec<Vec<T>>, positions: Vec<Position>) -> Result<Self, FinolaError> {
        if vectors.len() != positions.len() {
            return Err(FinolaError::DataLength {
                expected: vectors.len(),
                found: positions.len(),
            });
        }
        Ok(Self { vectors, positions })
    }

    pub fn paths(&self) -> usize {
        self.vectors.len()
    }

    pub fn channels(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Paths concatenated into one `M·C` vector.
    pub fn flatten(&self) -> Vec<T> {
        self.vectors.iter().flatten().copied().collect()
    }
}
