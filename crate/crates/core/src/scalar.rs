//! Scalar abstraction shared by propagation, training and analysis.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex64;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point element: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// `"f32"` or `"f64"`.
    const NAME: &'static str;

    /// Lossy conversion from `f64` (exact for `f64`).
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Normalization guard used when no explicit epsilon is configured.
    fn default_epsilon() -> Self;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
    fn default_epsilon() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
    fn default_epsilon() -> Self {
        1e-12
    }
}

/// Element with a modulus, used for pivot selection in elimination.
pub trait Pivot: Copy + num_traits::Num + std::ops::Neg<Output = Self> + Debug {
    fn modulus(&self) -> f64;
}

impl Pivot for f32 {
    fn modulus(&self) -> f64 {
        self.abs() as f64
    }
}

impl Pivot for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl Pivot for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
}
