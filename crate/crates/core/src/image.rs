use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image data length {found} does not match {width}x{height}x{channels}")]
    DataLength {
        width: usize,
        height: usize,
        channels: usize,
        found: usize,
    },
    #[error("image shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
}

/// Interleaved (row-major, channel-minor) image with `f64` samples, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height * channels {
            return Err(ImageError::DataLength {
                width,
                height,
                channels,
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

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
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

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn clamped(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    /// Planar (channel-major) copy, the layout the network consumes.
    pub fn to_planar(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            out.extend(self.data.iter().skip(c).step_by(self.channels));
        }
        out
    }

    pub fn from_planar(width: usize, height: usize, channels: usize, planar: &[f64]) -> Result<Self, ImageError> {
        let plane = width * height;
        if planar.len() != plane * channels {
            return Err(ImageError::DataLength {
                width,
                height,
                channels,
                found: planar.len(),
            });
        }
        Ok(Self::from_fn(width, height, channels, |x, y, c| planar[c * plane + y * width + x]))
    }

    pub fn require_same_shape(&self, other: &Self) -> Result<(), ImageError> {
        if self.shape() != other.shape() {
            return Err(ImageError::ShapeMismatch(self.shape(), other.shape()));
        }
        Ok(())
    }
}
