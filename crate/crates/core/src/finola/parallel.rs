//! Worker-parallel propagation. After the seed row (or column) is built, every
//! column (or row) is independent; workers own disjoint slices of the output.

use std::thread;

use super::propagate::{average_into, check_inputs};
use super::{step_into, Direction, FeatureMap, FinolaError, FinolaParams, Position};
use crate::scalar::Scalar;

/// Averaged-ordering propagation spread over up to `workers` threads (never
/// more than the machine's available parallelism). The result is bitwise
/// identical to [`super::propagate`] with [`super::ScanOrder::Averaged`].
pub fn propagate_parallel<T: Scalar>(
    q: &[T],
    origin: Position,
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
    workers: usize,
) -> Result<FeatureMap<T>, FinolaError> {
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    propagate_threads(q, origin, p, width, height, workers.min(cores))
}

pub(crate) fn propagate_threads<T: Scalar>(
    q: &[T],
    origin: Position,
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
    workers: usize,
) -> Result<FeatureMap<T>, FinolaError> {
    let (x0, y0) = check_inputs(q, origin, p, width, height)?;
    let workers = workers.max(1);
    let h = horizontal_first(q, p, width, height, x0, y0, workers);
    let v = vertical_first(q, p, width, height, x0, y0, workers);
    let mut out = FeatureMap::zeros(width, height, q.len())?;
    average_into(&h, &v, out.as_mut_slice());
    Ok(out)
}

/// Walks a line of `len` cells (stride `stride` between cells) outward from
/// `origin`, which must already hold the seed.
fn walk_line<T: Scalar>(
    line: &mut [T],
    c: usize,
    stride: usize,
    len: usize,
    origin: usize,
    forward: Direction,
    backward: Direction,
    p: &FinolaParams<T>,
    scratch: &mut [T],
    prev: &mut [T],
) {
    for i in origin + 1..len {
        prev.copy_from_slice(&line[(i - 1) * stride..(i - 1) * stride + c]);
        step_into(prev, p.matrix(forward), p.epsilon, scratch, &mut line[i * stride..i * stride + c]);
    }
    for i in (0..origin).rev() {
        prev.copy_from_slice(&line[(i + 1) * stride..(i + 1) * stride + c]);
        step_into(prev, p.matrix(backward), p.epsilon, scratch, &mut line[i * stride..i * stride + c]);
    }
}

fn horizontal_first<T: Scalar>(
    q: &[T],
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    workers: usize,
) -> Vec<T> {
    let c = q.len();
    let mut seed_row = vec![T::zero(); width * c];
    seed_row[x0 * c..(x0 + 1) * c].copy_from_slice(q);
    let mut scratch = vec![T::zero(); c];
    let mut prev = vec![T::zero(); c];
    walk_line(&mut seed_row, c, c, width, x0, Direction::Right, Direction::Left, p, &mut scratch, &mut prev);

    // Columns are computed into column-major buffers, one per chunk of columns.
    let chunk = width.div_ceil(workers.min(width));
    let column_len = height * c;
    let mut columns = vec![T::zero(); width * column_len];
    let run = |first_col: usize, block: &mut [T]| {
        let mut scratch = vec![T::zero(); c];
        let mut prev = vec![T::zero(); c];
        for (i, col) in block.chunks_mut(column_len).enumerate() {
            let x = first_col + i;
            col[y0 * c..(y0 + 1) * c].copy_from_slice(&seed_row[x * c..(x + 1) * c]);
            walk_line(col, c, c, height, y0, Direction::Down, Direction::Up, p, &mut scratch, &mut prev);
        }
    };
    if workers == 1 {
        run(0, &mut columns);
    } else {
        thread::scope(|s| {
            for (k, block) in columns.chunks_mut(chunk * column_len).enumerate() {
                let run = &run;
                s.spawn(move || run(k * chunk, block));
            }
        });
    }

    let mut out = vec![T::zero(); width * height * c];
    for x in 0..width {
        for y in 0..height {
            let src = x * column_len + y * c;
            let dst = (y * width + x) * c;
            out[dst..dst + c].copy_from_slice(&columns[src..src + c]);
        }
    }
    out
}

fn vertical_first<T: Scalar>(
    q: &[T],
    p: &FinolaParams<T>,
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    workers: usize,
) -> Vec<T> {
    let c = q.len();
    let mut seed_col = vec![T::zero(); height * c];
    seed_col[y0 * c..(y0 + 1) * c].copy_from_slice(q);
    let mut scratch = vec![T::zero(); c];
    let mut prev = vec![T::zero(); c];
    walk_line(&mut seed_col, c, c, height, y0, Direction::Down, Direction::Up, p, &mut scratch, &mut prev);

    // Rows are contiguous in the output, so workers write in place.
    let row_len = width * c;
    let chunk = height.div_ceil(workers.min(height));
    let mut out = vec![T::zero(); width * height * c];
    let run = |first_row: usize, block: &mut [T]| {
        let mut scratch = vec![T::zero(); c];
        let mut prev = vec![T::zero(); c];
        for (i, row) in block.chunks_mut(row_len).enumerate() {
            let y = first_row + i;
            row[x0 * c..(x0 + 1) * c].copy_from_slice(&seed_col[y * c..(y + 1) * c]);
            walk_line(row, c, c, width, x0, Direction::Right, Direction::Left, p, &mut scratch, &mut prev);
        }
    };
    if workers == 1 {
        run(0, &mut out);
    } else {
        thread::scope(|s| {
            for (k, block) in out.chunks_mut(chunk * row_len).enumerate() {
                let run = &run;
                s.spawn(move || run(k * chunk, block));
            }
        });
    }
    out
}
