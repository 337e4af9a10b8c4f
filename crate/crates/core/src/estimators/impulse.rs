//! Impulse pilots with per-antenna LS, the multi-antenna baseline.
//!
//! Every antenna sends one unit impulse inside the pilot area
//! `rows [0, M_tau-1] × k ∈ [-N_nu/2, N_nu/2-1]`. The area is cut into an
//! `R × C` grid of cells, one impulse per cell; the channel of antenna `p` is
//! read off the `M_max × N_max` window next to its impulse. When the cells are
//! smaller than the channel support the windows overlap and the layout is
//! flagged.

use crate::channel::SupportDims;
use crate::error::{dim_err, Result};
use crate::modem::{DelayDopplerFrame, OtfsConfig};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseLayout {
    /// `(delay row, Doppler index)` of each antenna's impulse.
    pub positions: Vec<(usize, i64)>,
    /// Cell size along delay.
    pub m_sp: usize,
    /// Cell size along Doppler.
    pub n_sp: usize,
    /// Cells smaller than the channel support.
    pub insufficient_guard: bool,
    pub support: SupportDims,
}

/// Packs `n_t` impulses row-major into an `m_tau × n_nu` pilot area.
pub fn impulse_mimo_layout(n_t: usize, support: SupportDims, m_tau: usize, n_nu: usize) -> Result<ImpulseLayout> {
    if n_t == 0 || m_tau == 0 || n_nu == 0 {
        return Err(dim_err(format!("impulse layout needs positive sizes, got N_t={n_t}, area=({m_tau}, {n_nu})")));
    }
    let per_row = (n_nu / support.n_max.max(1)).min(n_t).max(1);
    let rows = n_t.div_ceil(per_row);
    let m_sp = m_tau / rows;
    let n_sp = n_nu / per_row;
    if m_sp == 0 || n_sp == 0 {
        return Err(dim_err(format!("pilot area ({m_tau}, {n_nu}) cannot hold {n_t} impulses")));
    }
    let positions = (0..n_t)
        .map(|p| {
            let (row, col) = (p / per_row, p % per_row);
            (row * m_sp, -((n_nu / 2) as i64) + (col * n_sp + n_sp / 2) as i64)
        })
        .collect();
    Ok(ImpulseLayout {
        positions,
        m_sp,
        n_sp,
        insufficient_guard: m_sp < support.m_max || n_sp < support.n_max,
        support,
    })
}

impl ImpulseLayout {
    /// Transmit frame of antenna `p`: a single unit impulse.
    pub fn frame(&self, p: usize, cfg: &OtfsConfig) -> Result<DelayDopplerFrame> {
        let &(row, k) = self.positions.get(p).ok_or_else(|| dim_err(format!("antenna {p} has no impulse")))?;
        let mut grid = Array2::zeros((cfg.m, cfg.n));
        grid[[row, cfg.doppler_col(k)]] = Complex64::new(1.0, 0.0);
        DelayDopplerFrame::from_grid(grid)
    }
}

/// Per-antenna LS estimate
/// `Ĥ_p[ℓ, k] = N · Y[r_p + ℓ, k_p + k] · exp(-j2π (r_p + ℓ) k / (N (M + N_cp)))`
/// on `ℓ ∈ [0, M_max-1]`, `k ∈ [-N_max/2, N_max/2-1]`, zero elsewhere.
/// Returns an `M × N × N_t` tensor.
pub fn impulse_ls(y_dd: &DelayDopplerFrame, layout: &ImpulseLayout, cfg: &OtfsConfig) -> Result<Array3<Complex64>> {
    if y_dd.dims() != (cfg.m, cfg.n) {
        return Err(dim_err(format!("received frame is {:?}, expected ({}, {})", y_dd.dims(), cfg.m, cfg.n)));
    }
    let n_t = layout.positions.len();
    let SupportDims { m_max, n_max } = layout.support;
    let half = (n_max / 2) as i64;
    let mut h = Array3::zeros((cfg.m, cfg.n, n_t));
    for (p, &(row, kp)) in layout.positions.iter().enumerate() {
        for l in 0..m_max {
            let r = row + l;
            for k in -half..half {
                let v = y_dd.at(r as i64, kp + k) * cfg.n as f64 * cfg.dd_phase(r as i64, k).conj();
                h[[l, cfg.doppler_col(k), p]] = v;
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_capacity() {
        let s = SupportDims { m_max: 4, n_max: 4 };
        let l = impulse_mimo_layout(4, s, 8, 8).unwrap();
        assert!(!l.insufficient_guard);
        assert_eq!(l.positions, vec![(0, -2), (0, 2), (4, -2), (4, 2)]);
        let l = impulse_mimo_layout(16, s, 8, 16).unwrap();
        assert!(l.insufficient_guard);
        let mut uniq = l.positions.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
    }

    #[test]
    fn zero_frame_gives_zero_estimate() {
        let cfg = OtfsConfig::new(16, 8, 4, 15e3, 1e9).unwrap();
        let l = impulse_mimo_layout(2, SupportDims { m_max: 3, n_max: 2 }, 6, 4).unwrap();
        let h = impulse_ls(&DelayDopplerFrame::zeros(&cfg), &l, &cfg).unwrap();
        assert!(h.iter().all(|v| v.norm() == 0.0));
    }
}
