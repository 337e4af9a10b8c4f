//! Least squares on a column subset of the sensing matrix.

use crate::error::{dim_err, Result};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

/// Gram-matrix condition number above which the Tikhonov fallback is used.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct LsSolution {
    pub coef: Vec<Complex64>,
    /// The Tikhonov fallback was used.
    pub regularized: bool,
}

/// Solves `min ‖y - A_cols x‖` by Householder QR; falls back to
/// `(G + λI) x = A^H y` with `λ = 1e-10 tr(G) / n` when the Gram matrix
/// `G = A^H A` is ill-conditioned or the system is underdetermined.
pub fn solve_ls(a: &Array2<Complex64>, cols: &[usize], y: &[Complex64]) -> Result<LsSolution> {
    let rows = a.nrows();
    if y.len() != rows {
        return Err(dim_err(format!("y has {} entries, matrix has {rows} rows", y.len())));
    }
    if let Some(&c) = cols.iter().find(|&&c| c >= a.ncols()) {
        return Err(dim_err(format!("column {c} out of range for {} columns", a.ncols())));
    }
    let n = cols.len();
    if n == 0 {
        return Ok(LsSolution { coef: Vec::new(), regularized: false });
    }
    let sub = DMatrix::from_fn(rows, n, |i, j| a[[i, cols[j]]]);
    let rhs = DVector::from_column_slice(y);

    if n <= rows {
        let qr = sub.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].norm()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 && (max / min).powi(2) <= MAX_GRAM_CONDITION {
            let qty = qr.q().adjoint() * &rhs;
            if let Some(x) = r.solve_upper_triangular(&qty) {
                return Ok(LsSolution { coef: x.iter().copied().collect(), regularized: false });
            }
        }
    }

    let gram = sub.adjoint() * &sub;
    let trace: f64 = (0..n).map(|i| gram[(i, i)].re).sum();
    let lambda = (1e-10 * trace / n as f64).max(f64::MIN_POSITIVE);
    let mut reg = gram;
    for i in 0..n {
        reg[(i, i)] += Complex64::new(lambda, 0.0);
    }
    let aty = sub.adjoint() * &rhs;
    let x = match reg.clone().cholesky() {
        Some(ch) => ch.solve(&aty),
        None => reg
            .lu()
            .solve(&aty)
            .ok_or_else(|| dim_err("regularized normal equations are singular"))?,
    };
    Ok(LsSolution { coef: x.iter().copied().collect(), regularized: true })
}

/// `y - A_cols x`.
pub fn residual(a: &Array2<Complex64>, cols: &[usize], coef: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    let mut r = y.to_vec();
    for (&c, &x) in cols.iter().zip(coef) {
        for (ri, av) in r.iter_mut().zip(a.column(c).iter()) {
            *ri -= av * x;
        }
    }
    r
}

/// `A^H r`.
pub fn correlate(a: &Array2<Complex64>, r: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.ncols()];
    for (row, rv) in a.rows().into_iter().zip(r) {
        for (o, av) in out.iter_mut().zip(row.iter()) {
            *o += av.conj() * rv;
        }
    }
    out
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut r = rng::rng(seed);
        Array2::from_shape_fn((rows, cols), |_| rng::complex_gaussian(&mut r, 1.0))
    }

    #[test]
    fn square_system_matches_direct_solve() {
        let a = random(6, 6, 1);
        let x: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let y: Vec<Complex64> = (0..6).map(|i| (0..6).map(|j| a[[i, j]] * x[j]).sum()).collect();
        let sol = solve_ls(&a, &[0, 1, 2, 3, 4, 5], &y).unwrap();
        assert!(!sol.regularized);
        let direct = DMatrix::from_fn(6, 6, |i, j| a[[i, j]]).lu().solve(&DVector::from_column_slice(&y)).unwrap();
        for (s, d) in sol.coef.iter().zip(direct.iter()) {
            assert!((s - d).norm() < 1e-8);
        }
        for (s, t) in sol.coef.iter().zip(&x) {
            assert!((s - t).norm() < 1e-8);
        }
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let a = random(20, 8, 2);
        let mut r = rng::rng(3);
        let y: Vec<Complex64> = (0..20).map(|_| rng::complex_gaussian(&mut r, 1.0)).collect();
        let cols = [1, 4, 6];
        let sol = solve_ls(&a, &cols, &y).unwrap();
        let res = residual(&a, &cols, &sol.coef, &y);
        let corr = correlate(&a, &res);
        for &c in &cols {
            assert!(corr[c].norm() < 1e-10);
        }
    }

    #[test]
    fn collinear_columns_fall_back_to_tikhonov() {
        let mut a = random(10, 3, 4);
        let col0 = a.column(0).to_owned();
        a.column_mut(2).assign(&col0);
        let y: Vec<Complex64> = a.column(0).iter().map(|v| v * 2.0).collect();
        let sol = solve_ls(&a, &[0, 1, 2], &y).unwrap();
        assert!(sol.regularized);
        let res = residual(&a, &[0, 1, 2], &sol.coef, &y);
        assert!(norm(&res) < 1e-6 * norm(&y));
        // minimum-norm split across the duplicated columns
        assert!((sol.coef[0] - sol.coef[2]).norm() < 1e-4);
    }

    #[test]
    fn argument_checks() {
        let a = random(4, 3, 5);
        assert!(solve_ls(&a, &[0], &[Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(solve_ls(&a, &[3], &[Complex64::new(0.0, 0.0); 4]).is_err());
        assert!(solve_ls(&a, &[], &[Complex64::new(0.0, 0.0); 4]).unwrap().coef.is_empty());
    }
}
