//! Block-wise masked prediction geometry.
//!
//! A single unmasked block of half the grid size floats over the grid. Each
//! of its cells predicts three masked cells—one horizontal, one vertical,
//! one diagonal—with one norm+linear jump per axis. Per axis the block's
//! cells split by jump sign, so a block touching two grid edges forms one
//! group, one edge two groups, and no edge four.

use rand::Rng;
use thiserror::Error;

use crate::finola::{step, Direction, FeatureMap, FinolaError, FinolaParams};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("grid {width}x{height} must have positive even sides")]
    OddGrid { width: usize, height: usize },
    #[error("block offset ({ox}, {oy}) leaves the grid")]
    OffsetOutOfRange { ox: usize, oy: usize },
    #[error("unmasked features are {found:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },
    #[error(transparent)]
    Finola(#[from] FinolaError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocationClass {
    Corner,
    Edge,
    Middle,
}

/// Sources on one axis predict forward (`+`) or backward (`−`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum JumpSign {
    Backward,
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub source: (usize, usize),
    pub horizontal: (usize, usize),
    pub vertical: (usize, usize),
    pub diagonal: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskGroup {
    pub x_sign: JumpSign,
    pub y_sign: JumpSign,
    pub cells: Vec<Prediction>,
}

impl MaskGroup {
    pub fn horizontal_direction(&self) -> Direction {
        match self.x_sign {
            JumpSign::Forward => Direction::Right,
            JumpSign::Backward => Direction::Left,
        }
    }

    pub fn vertical_direction(&self) -> Direction {
        match self.y_sign {
            JumpSign::Forward => Direction::Down,
            JumpSign::Backward => Direction::Up,
        }
    }
}

/// Per-axis bijection from the unmasked interval `[o, o+h)` onto the masked
/// complement `[0, o) ∪ [o+h, 2h)`.
fn axis_target(s: usize, o: usize, h: usize) -> (usize, JumpSign) {
    if s < 2 * o {
        (s - o, JumpSign::Backward)
    } else {
        (s + h - o, JumpSign::Forward)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadrantMask {
    pub width: usize,
    pub height: usize,
    pub ox: usize,
    pub oy: usize,
    pub block_width: usize,
    pub block_height: usize,
    pub class: LocationClass,
    pub groups: Vec<MaskGroup>,
}

impl QuadrantMask {
    pub fn new(width: usize, height: usize, ox: usize, oy: usize) -> Result<Self, MaskError> {
        if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
            return Err(MaskError::OddGrid { width, height });
        }
        let (bw, bh) = (width / 2, height / 2);
        if ox > width - bw || oy > height - bh {
            return Err(MaskError::OffsetOutOfRange { ox, oy });
        }
        let touches = |o: usize, span: usize, b: usize| usize::from(o == 0) + usize::from(o + b == span);
        // A half-size block can touch both ends of an axis only if the axis
        // has length zero, so each axis contributes at most one edge.
        let class = match touches(ox, width, bw).min(1) + touches(oy, height, bh).min(1) {
            2 => LocationClass::Corner,
            1 => LocationClass::Edge,
            _ => LocationClass::Middle,
        };
        let mut groups: Vec<MaskGroup> = Vec::new();
        for y in oy..oy + bh {
            for x in ox..ox + bw {
                let (tx, sx) = axis_target(x, ox, bw);
                let (ty, sy) = axis_target(y, oy, bh);
                let p = Prediction {
                    source: (x, y),
                    horizontal: (tx, y),
                    vertical: (x, ty),
                    diagonal: (tx, ty),
                };
                match groups.iter_mut().find(|g| g.x_sign == sx && g.y_sign == sy) {
                    Some(g) => g.cells.push(p),
                    None => groups.push(MaskGroup {
                        x_sign: sx,
                        y_sign: sy,
                        cells: vec![p],
                    }),
                }
            }
        }
        groups.sort_by_key(|g| (g.y_sign, g.x_sign));
        Ok(Self {
            width,
            height,
            ox,
            oy,
            block_width: bw,
            block_height: bh,
            class,
            groups,
        })
    }

    pub fn is_unmasked(&self, x: usize, y: usize) -> bool {
        (self.ox..self.ox + self.block_width).contains(&x) && (self.oy..self.oy + self.block_height).contains(&y)
    }

    /// Row-major flags, `true` on masked cells (where the loss is taken).
    pub fn masked_cells(&self) -> Vec<bool> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| !self.is_unmasked(x, y))
            .collect()
    }

    /// Grayscale visual: unmasked 255, masked 0.
    pub fn to_gray(&self) -> Vec<u8> {
        self.masked_cells().into_iter().map(|m| if m { 0 } else { 255 }).collect()
    }
}

/// Number of block placements on a `W×H` grid.
pub fn valid_offsets(width: usize, height: usize) -> usize {
    (width - width / 2 + 1) * (height - height / 2 + 1)
}

/// Uniformly random block placement.
pub fn sample_mask<R: Rng>(width: usize, height: usize, rng: &mut R) -> Result<QuadrantMask, MaskError> {
    if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
        return Err(MaskError::OddGrid { width, height });
    }
    let ox = rng.gen_range(0..=width / 2);
    let oy = rng.gen_range(0..=height / 2);
    QuadrantMask::new(width, height, ox, oy)
}

/// Fills the masked cells of a full-size map from the block features.
/// Unmasked cells carry the block features themselves.
pub fn predict_masked<T: Scalar>(
    block: &FeatureMap<T>,
    mask: &QuadrantMask,
    p: &FinolaParams<T>,
) -> Result<FeatureMap<T>, MaskError> {
    let c = p.channels();
    let expected = (mask.block_width, mask.block_height, c);
    let found = (block.width(), block.height(), block.channels());
    if expected != found {
        return Err(MaskError::ShapeMismatch { expected, found });
    }
    let mut out = FeatureMap::zeros(mask.width, mask.height, c)?;
    for g in &mask.groups {
        let (hd, vd) = (g.horizontal_direction(), g.vertical_direction());
        for cell in &g.cells {
            let (sx, sy) = cell.source;
            let src = block.cell(sx - mask.ox, sy - mask.oy);
            let horizontal = step(src, hd, p)?;
            let vertical = step(src, vd, p)?;
            let diagonal = step(&horizontal, vd, p)?;
            out.set_cell(sx, sy, src);
            out.set_cell(cell.horizontal.0, cell.horizontal.1, &horizontal);
            out.set_cell(cell.vertical.0, cell.vertical.1, &vertical);
            out.set_cell(cell.diagonal.0, cell.diagonal.1, &diagonal);
        }
    }
    Ok(out)
}
