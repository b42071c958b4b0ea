use super::{normalize_into, Direction, FeatureMap, FinolaError, FinolaParams, LatentSet, Position, ScanOrder};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `out = z + M·normalize(z)`; `scratch` holds the normalized vector.
///
/// Every propagation routine funnels through this kernel so that all of
/// them perform the same arithmetic per element.
pub fn step_into<T: Scalar>(z: &[T], m: &Matrix<T>, epsilon: T, scratch: &mut [T], out: &mut [T]) {
    normalize_into(z, epsilon, scratch);
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (&mij, &s) in m.row(i).iter().zip(scratch.iter()) {
            acc += mij * s;
        }
        *o = z[i] + acc;
    }
}

/// One norm+linear step in direction `dir`.
pub fn step<T: Scalar>(z: &[T], dir: Direction, p: &FinolaParams<T>) -> Result<Vec<T>, FinolaError> {
    let c = p.channels();
    if z.len() != c {
        return Err(FinolaError::ChannelMismatch {
            expected: c,
            found: z.len(),
        });
    }
    let mut scratch = vec![T::zero(); c];
    let mut out = vec![T::zero(); c];
    step_into(z, p.matrix(dir), p.epsilon, &mut scratch, &mut out);
    Ok(out)
}

pub(crate) fn check_inputs<T: Scalar>(
    q: &[T],
    origin: Position,
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
) -> Result<(usize, usize), FinolaError> {
    if q.len() != p.channels() {
        return Err(FinolaError::ChannelMismatch {
            expected: p.channels(),
            found: q.len(),
        });
    }
    if width == 0 || height == 0 {
        return Err(FinolaError::EmptyGrid {
            width,
            height,
            channels: q.len(),
        });
    }
    origin.resolve(width, height)
}

fn fill_row<T: Scalar>(map: &mut FeatureMap<T>, p: &FinolaParams<T>, x0: usize, y: usize) {
    for x in x0 + 1..map.width() {
        let next = step(map.cell(x - 1, y), Direction::Right, p).expect("channel count checked");
        map.set_cell(x, y, &next);
    }
    for x in (0..x0).rev() {
        let next = step(map.cell(x + 1, y), Direction::Left, p).expect("channel count checked");
        map.set_cell(x, y, &next);
    }
}

fn fill_column<T: Scalar>(map: &mut FeatureMap<T>, p: &FinolaParams<T>, x: usize, y0: usize) {
    for y in y0 + 1..map.height() {
        let next = step(map.cell(x, y - 1), Direction::Down, p).expect("channel count checked");
        map.set_cell(x, y, &next);
    }
    for y in (0..y0).rev() {
        let next = step(map.cell(x, y + 1), Direction::Up, p).expect("channel count checked");
        map.set_cell(x, y, &next);
    }
}

pub(crate) fn average_into<T: Scalar>(h: &[T], v: &[T], out: &mut [T]) {
    let half = T::from_f64_lossy(0.5);
    for ((o, &a), &b) in out.iter_mut().zip(h).zip(v) {
        *o = (a + b) * half;
    }
}

/// Generates a W×H map from the initial condition `q` placed at `origin`.
pub fn propagate<T: Scalar>(
    q: &[T],
    origin: Position,
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
    order: ScanOrder,
) -> Result<FeatureMap<T>, FinolaError> {
    let (x0, y0) = check_inputs(q, origin, p, width, height)?;
    let single = |horizontal_first: bool| -> Result<FeatureMap<T>, FinolaError> {
        let mut map = FeatureMap::zeros(width, height, q.len())?;
        map.set_cell(x0, y0, q);
        if horizontal_first {
            fill_row(&mut map, p, x0, y0);
            for x in 0..width {
                fill_column(&mut map, p, x, y0);
            }
        } else {
            fill_column(&mut map, p, x0, y0);
            for y in 0..height {
                fill_row(&mut map, p, x0, y);
            }
        }
        Ok(map)
    };
    match order {
        ScanOrder::HorizontalFirst => single(true),
        ScanOrder::VerticalFirst => single(false),
        ScanOrder::Averaged => {
            let h = single(true)?;
            let v = single(false)?;
            let mut out = FeatureMap::zeros(width, height, q.len())?;
            average_into(h.as_slice(), v.as_slice(), out.as_mut_slice());
            Ok(out)
        }
    }
}

/// Sum of one propagated map per path; all paths share `p`.
pub fn multipath_propagate<T: Scalar>(
    latents: &LatentSet<T>,
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
    order: ScanOrder,
) -> Result<FeatureMap<T>, FinolaError> {
    if latents.paths() == 0 {
        return Err(FinolaError::NoPaths);
    }
    let mut total = FeatureMap::zeros(width, height, p.channels())?;
    for (q, &pos) in latents.vectors.iter().zip(&latents.positions) {
        let map = propagate(q, pos, p, width, height, order)?;
        for (t, &m) in total.as_mut_slice().iter_mut().zip(map.as_slice()) {
            *t += m;
        }
    }
    Ok(total)
}
