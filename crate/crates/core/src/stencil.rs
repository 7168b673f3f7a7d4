//! Fourth-order central differences on grid fields.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::types::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    Q,
    P,
}

/// Interior points (two dropped at every edge), q-major.
pub(crate) fn interior(f: &ComplexField) -> Result<Vec<(usize, usize)>> {
    let g = &f.grid;
    if g.nq < 5 || g.np < 5 {
        return Err(Error::Resolution(format!(
            "need at least 5 points per axis, got {}x{}",
            g.nq, g.np
        )));
    }
    Ok((2..g.nq - 2)
        .flat_map(|i| (2..g.np - 2).map(move |j| (i, j)))
        .collect())
}

fn at(f: &ComplexField, axis: Axis, i: usize, j: usize, off: isize) -> C64 {
    match axis {
        Axis::Q => f.get((i as isize + off) as usize, j),
        Axis::P => f.get(i, (j as isize + off) as usize),
    }
}

fn step(f: &ComplexField, axis: Axis) -> f64 {
    match axis {
        Axis::Q => f.grid.dq(),
        Axis::P => f.grid.dp(),
    }
}

pub(crate) fn first(f: &ComplexField, axis: Axis, i: usize, j: usize) -> C64 {
    let h = step(f, axis);
    (at(f, axis, i, j, -2) - 8.0 * at(f, axis, i, j, -1) + 8.0 * at(f, axis, i, j, 1)
        - at(f, axis, i, j, 2))
        / (12.0 * h)
}

pub(crate) fn second(f: &ComplexField, axis: Axis, i: usize, j: usize) -> C64 {
    let h = step(f, axis);
    (-at(f, axis, i, j, -2) + 16.0 * at(f, axis, i, j, -1) - 30.0 * f.get(i, j)
        + 16.0 * at(f, axis, i, j, 1)
        - at(f, axis, i, j, 2))
        / (12.0 * h * h)
}
