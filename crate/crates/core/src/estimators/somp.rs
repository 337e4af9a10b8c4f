//! 3D structured OMP over the delay-Doppler-angle support.
//!
//! Each iteration selects one delay bin, a centered Doppler block and a cyclic
//! angle burst of length `D`. The burst start is found through the lifting
//! matrix `L ∈ {0,1}^{N_t × N_t D}` whose column `(i-1)D + j` has its single 1
//! at row `i ⊕ j` (cyclic sum on `1..=N_t`).

use super::ls::{correlate, norm, residual, solve_ls};
use super::EstimateRecord;
use crate::channel::default_burst_len;
use crate::error::{cfg_err, dim_err, OtfsError, Result};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

fn default_epsilon() -> f64 {
    0.9
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SompParams {
    /// Iterations (assumed dominant paths).
    pub n_p: usize,
    /// Angle-burst length.
    pub d: usize,
    /// Doppler-block energy threshold in `(0, 1)`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl SompParams {
    /// `D = max(1, round(N_t / 10))`, `ε = 0.9`.
    pub fn with_defaults(n_p: usize, n_t: usize) -> Self {
        Self { n_p, d: default_burst_len(n_t), epsilon: default_epsilon() }
    }

    pub fn validate(&self, n_t: usize) -> Result<()> {
        if self.n_p == 0 {
            return Err(cfg_err("N_p must be at least 1"));
        }
        if self.d == 0 || self.d > n_t {
            return Err(cfg_err(format!("burst length D = {} must lie in [1, {n_t}]", self.d)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(cfg_err(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Truncated channel dimensions `(M_g, N_g, N_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncDims {
    pub m_g: usize,
    pub n_g: usize,
    pub n_t: usize,
}

impl TruncDims {
    pub fn cols(&self) -> usize {
        self.m_g * self.n_g * self.n_t
    }

    fn col(&self, l: usize, kc: usize, ri: usize) -> usize {
        ri * self.m_g * self.n_g + l * self.n_g + kc
    }
}

/// `i ⊕ j` on `1..=N_t`.
pub fn lifting_index(i: usize, j: usize, n_t: usize) -> Result<usize> {
    if i == 0 || i > n_t || j == 0 || j > n_t {
        return Err(OtfsError::Argument(format!("lifting index ({i}, {j}) outside 1..={n_t}")));
    }
    let s = i + j;
    Ok(if s <= n_t { s } else { s - n_t })
}

/// Lifting matrix `L` (`N_t × N_t D`).
pub fn build_lifting_matrix(n_t: usize, d: usize) -> Result<Array2<f64>> {
    if d == 0 || d > n_t {
        return Err(OtfsError::Argument(format!("burst length {d} outside 1..={n_t}")));
    }
    let mut l = Array2::zeros((n_t, n_t * d));
    for i in 1..=n_t {
        for j in 1..=d {
            l[[lifting_index(i, j, n_t)? - 1, (i - 1) * d + j - 1]] = 1.0;
        }
    }
    Ok(l)
}

/// Start (0-based) of the length-`d` cyclic window holding the most energy of
/// `e_theta`, found as the row-norm argmax of the `N_t × D` reshape of
/// `L^H e_theta`. Row `i` covers positions `i ⊕ 1 … i ⊕ D`, so its window
/// starts at `i ⊕ 1`. Ties go to the lowest row.
pub fn burst_start(e_theta: &[f64], d: usize) -> Result<usize> {
    let n_t = e_theta.len();
    let lift = build_lifting_matrix(n_t, d)?;
    let lifted = lift.t().dot(&ndarray::ArrayView1::from(e_theta));
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n_t {
        let row: f64 = (0..d).map(|j| lifted[i * d + j].powi(2)).sum();
        if row > best.1 {
            best = (i, row);
        }
    }
    Ok((best.0 + 1) % n_t)
}

/// 3D structured OMP: `params.n_p` iterations of delay/Doppler/angle support
/// detection followed by least squares on the accumulated support.
pub fn somp3d(y: &[Complex64], psi: &Array2<Complex64>, dims: TruncDims, params: &SompParams) -> Result<EstimateRecord> {
    let (rows, cols) = psi.dim();
    if y.len() != rows {
        return Err(dim_err(format!("y has {} entries, Ψ has {rows} rows", y.len())));
    }
    if cols != dims.cols() {
        return Err(dim_err(format!("Ψ has {cols} columns, dims {dims:?} need {}", dims.cols())));
    }
    if dims.n_g % 2 != 0 || dims.n_g == 0 {
        return Err(dim_err(format!("N_g must be even and positive, got {}", dims.n_g)));
    }
    params.validate(dims.n_t)?;
    let TruncDims { m_g, n_g, n_t } = dims;
    let half_g = n_g / 2;

    let mut rec = EstimateRecord {
        h_hat: vec![Complex64::new(0.0, 0.0); cols],
        support: Vec::new(),
        residual_norms: Vec::new(),
        flags: Vec::new(),
    };
    let mut omega: BTreeSet<usize> = BTreeSet::new();
    let mut support: Vec<usize> = Vec::new();
    let mut coef: Vec<Complex64> = Vec::new();
    let mut r = y.to_vec();

    for _ in 0..params.n_p {
        let e = correlate(psi, &r);
        let mag = |l: usize, kc: usize, ri: usize| e[dims.col(l, kc, ri)].norm_sqr();

        // delay support
        let mut m_tau = 0;
        let mut best = f64::NEG_INFINITY;
        for l in 0..m_g {
            let s: f64 = (0..n_g).flat_map(|kc| (0..n_t).map(move |ri| (kc, ri))).map(|(kc, ri)| mag(l, kc, ri)).sum();
            if s > best {
                best = s;
                m_tau = l;
            }
        }

        // Doppler block
        let e_nu: Vec<f64> = (0..n_g).map(|kc| (0..n_t).map(|ri| mag(m_tau, kc, ri)).sum()).collect();
        let total: f64 = e_nu.iter().sum();
        let mut n_nu = half_g;
        for n in 1..=half_g {
            let block: f64 = e_nu[half_g - n..half_g + n].iter().sum();
            if block.sqrt() >= params.epsilon * total.sqrt() {
                n_nu = n;
                break;
            }
        }
        let doppler = half_g - n_nu..half_g + n_nu;

        // angle burst
        let e_theta: Vec<f64> = (0..n_t)
            .map(|ri| doppler.clone().map(|kc| mag(m_tau, kc, ri)).sum::<f64>().sqrt())
            .collect();
        let start = burst_start(&e_theta, params.d)?;

        let mut next = omega.clone();
        for j in 0..params.d {
            let ri = (start + j) % n_t;
            for kc in doppler.clone() {
                next.insert(dims.col(m_tau, kc, ri));
            }
        }
        if next.len() > rows {
            rec.flag("support_overflow");
            break;
        }
        omega = next;
        support = omega.iter().copied().collect();
        let sol = solve_ls(psi, &support, y)?;
        if sol.regularized {
            rec.flag("regularized");
        }
        coef = sol.coef;
        r = residual(psi, &support, &coef, y);
        rec.residual_norms.push(norm(&r));
    }

    for (&c, &v) in support.iter().zip(&coef) {
        rec.h_hat[c] = v;
    }
    rec.support = support;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn lifting_index_examples() {
        assert_eq!(lifting_index(1, 1, 8).unwrap(), 2);
        assert_eq!(lifting_index(8, 3, 8).unwrap(), 3);
        assert_eq!(lifting_index(5, 3, 8).unwrap(), 8);
        assert!(lifting_index(0, 1, 8).is_err());
        assert!(lifting_index(9, 1, 8).is_err());
    }

    #[test]
    fn lifting_matrix_sums() {
        for n_t in [2, 4, 8, 16] {
            for d in 1..=n_t {
                let l = build_lifting_matrix(n_t, d).unwrap();
                assert!(l.columns().into_iter().all(|c| c.sum() == 1.0));
                assert!(l.rows().into_iter().all(|r| r.sum() == d as f64));
            }
        }
        let l = build_lifting_matrix(4, 1).unwrap();
        for i in 0..4 {
            assert_eq!(l[[(i + 1) % 4, i]], 1.0);
        }
        assert!(build_lifting_matrix(4, 5).is_err());
    }

    #[test]
    fn burst_start_recovers_unit_bursts() {
        let e = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(burst_start(&e, 2).unwrap(), 2);
        let wrap = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(burst_start(&wrap, 2).unwrap(), 7);
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut r = rng::rng(seed);
        Array2::from_shape_fn((rows, cols), |_| rng::complex_gaussian(&mut r, 1.0))
    }

    #[test]
    fn zero_measurement_gives_zero_estimate() {
        let dims = TruncDims { m_g: 3, n_g: 4, n_t: 4 };
        let psi = random(40, dims.cols(), 1);
        let rec = somp3d(&[Complex64::new(0.0, 0.0); 40], &psi, dims, &SompParams { n_p: 3, d: 1, epsilon: 0.9 }).unwrap();
        assert!(rec.h_hat.iter().all(|v| v.norm() == 0.0));
        assert_eq!(rec.residual_norms.len(), 3);
    }

    #[test]
    fn constructed_single_path_is_recovered() {
        let dims = TruncDims { m_g: 4, n_g: 4, n_t: 8 };
        let psi = random(60, dims.cols(), 2);
        let mut h = vec![Complex64::new(0.0, 0.0); dims.cols()];
        let mut r = rng::rng(3);
        for ri in [7usize, 0] {
            for kc in [1usize, 2] {
                h[dims.col(2, kc, ri)] = rng::complex_gaussian(&mut r, 1.0);
            }
        }
        let y: Vec<Complex64> = (0..60).map(|i| (0..dims.cols()).map(|c| psi[[i, c]] * h[c]).sum()).collect();
        let rec = somp3d(&y, &psi, dims, &SompParams { n_p: 1, d: 2, epsilon: 0.9 }).unwrap();
        let err: f64 = rec.h_hat.iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum();
        let en: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        assert!(err / en < 1e-6);
        assert_eq!(rec.support.len(), 4);
    }

    #[test]
    fn overflow_stops_early() {
        let dims = TruncDims { m_g: 2, n_g: 4, n_t: 4 };
        let psi = random(5, dims.cols(), 4);
        let y: Vec<Complex64> = psi.column(0).to_vec();
        let rec = somp3d(&y, &psi, dims, &SompParams { n_p: 3, d: 4, epsilon: 0.99 }).unwrap();
        assert!(rec.flags.iter().any(|f| f == "support_overflow"));
        assert!(rec.support.len() <= 5);
    }

    #[test]
    fn parameter_checks() {
        assert!(SompParams { n_p: 0, d: 1, epsilon: 0.9 }.validate(4).is_err());
        assert!(SompParams { n_p: 1, d: 5, epsilon: 0.9 }.validate(4).is_err());
        assert!(SompParams { n_p: 1, d: 1, epsilon: 1.0 }.validate(4).is_err());
        assert_eq!(SompParams::with_defaults(6, 16).d, 2);
        assert_eq!(SompParams::with_defaults(6, 4).d, 1);
    }
}
