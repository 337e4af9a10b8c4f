//! Orthogonal matching pursuit.

use super::ls::{correlate, norm, residual, solve_ls};
use super::EstimateRecord;
use crate::error::{dim_err, Result};
use ndarray::Array2;
use num_complex::Complex64;

/// Runs `k` OMP iterations: pick the unselected column with the largest
/// `|ψ^H r|` (lowest index on ties), least squares on the accumulated support,
/// update the residual. Stops early once the residual vanishes.
pub fn omp(y: &[Complex64], psi: &Array2<Complex64>, k: usize) -> Result<EstimateRecord> {
    let (rows, cols) = psi.dim();
    if y.len() != rows {
        return Err(dim_err(format!("y has {} entries, Ψ has {rows} rows", y.len())));
    }
    if k > rows {
        return Err(dim_err(format!("sparsity {k} exceeds the {rows} measurements")));
    }
    let mut rec = EstimateRecord {
        h_hat: vec![Complex64::new(0.0, 0.0); cols],
        support: Vec::new(),
        residual_norms: Vec::new(),
        flags: Vec::new(),
    };
    let mut selected = vec![false; cols];
    let mut coef = Vec::new();
    let mut r = y.to_vec();
    for _ in 0..k {
        if norm(&r) == 0.0 {
            break;
        }
        let e = correlate(psi, &r);
        let mut best: Option<(usize, f64)> = None;
        for (c, v) in e.iter().enumerate() {
            if selected[c] {
                continue;
            }
            let m = v.norm();
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((c, m));
            }
        }
        let Some((c, _)) = best else { break };
        selected[c] = true;
        rec.support.push(c);
        let sol = solve_ls(psi, &rec.support, y)?;
        if sol.regularized {
            rec.flag("regularized");
        }
        coef = sol.coef;
        r = residual(psi, &rec.support, &coef, y);
        rec.residual_norms.push(norm(&r));
    }
    let mut pairs: Vec<(usize, Complex64)> = rec.support.iter().copied().zip(coef).collect();
    pairs.sort_by_key(|p| p.0);
    rec.support = pairs.iter().map(|p| p.0).collect();
    for (c, v) in pairs {
        rec.h_hat[c] = v;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut r = rng::rng(seed);
        Array2::from_shape_fn((rows, cols), |_| rng::complex_gaussian(&mut r, 1.0 / rows as f64))
    }

    #[test]
    fn single_atom() {
        let psi = random(16, 32, 1);
        let y: Vec<Complex64> = psi.column(5).iter().map(|v| v * 3.0).collect();
        let rec = omp(&y, &psi, 1).unwrap();
        assert_eq!(rec.support, vec![5]);
        assert!((rec.h_hat[5] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_measurement() {
        let psi = random(8, 12, 2);
        let rec = omp(&[Complex64::new(0.0, 0.0); 8], &psi, 3).unwrap();
        assert!(rec.h_hat.iter().all(|v| v.norm() == 0.0));
        assert!(rec.support.is_empty());
    }

    #[test]
    fn rejects_excess_sparsity() {
        let psi = random(4, 8, 3);
        assert!(omp(&[Complex64::new(1.0, 0.0); 4], &psi, 5).is_err());
        assert!(omp(&[Complex64::new(1.0, 0.0); 3], &psi, 1).is_err());
    }
}
