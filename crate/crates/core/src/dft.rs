//! Unitary DFTs along the axes of a 2D grid.
//!
//! `F_n[a, b] = exp(-j 2π a b / n) / sqrt(n)`. Storage indices are used
//! directly, so a grid whose Doppler column `c` represents `k = c - N/2`
//! is transformed exactly like the matrix products in the modem chain.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Multiply by `F` (forward, negative exponent).
    Forward,
    /// Multiply by `F^H` (inverse, positive exponent).
    Inverse,
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    match dir {
        Direction::Forward => planner.plan_fft_forward(len),
        Direction::Inverse => planner.plan_fft_inverse(len),
    }
}

/// Applies the unitary DFT (or its inverse) to every column: returns `F_M · X`
/// or `F_M^H · X`.
pub fn along_columns(x: &Array2<Complex64>, dir: Direction) -> Array2<Complex64> {
    let (rows, _) = x.dim();
    let fft = plan(rows, dir);
    let scale = 1.0 / (rows as f64).sqrt();
    let mut out = x.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); rows];
    for mut col in out.axis_iter_mut(Axis(1)) {
        for (b, v) in buf.iter_mut().zip(col.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in col.iter_mut().zip(buf.iter()) {
            *v = *b * scale;
        }
    }
    out
}

/// Transforms every row: `Forward` returns `X · F_N`, `Inverse` returns `X · F_N^H`.
/// (`F_N` is symmetric, so right-multiplication is a DFT along each row.)
pub fn along_rows(x: &Array2<Complex64>, dir: Direction) -> Array2<Complex64> {
    let (_, cols) = x.dim();
    let fft = plan(cols, dir);
    let scale = 1.0 / (cols as f64).sqrt();
    let mut out = x.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); cols];
    for mut row in out.axis_iter_mut(Axis(0)) {
        for (b, v) in buf.iter_mut().zip(row.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in row.iter_mut().zip(buf.iter()) {
            *v = *b * scale;
        }
    }
    out
}
