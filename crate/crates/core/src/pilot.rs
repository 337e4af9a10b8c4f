//! Pilot/guard layout, non-orthogonal Gaussian pilots and sensing-matrix assembly.
//!
//! Frame layout (delay rows cyclic modulo `M`, Doppler centered):
//!
//! ```text
//! rows [M - M_g, M - 1]   delay guard
//! rows [0, M_tau - 1]     pilot block, k ∈ [-N_nu/2, N_nu/2 - 1]
//! ```
//!
//! with `N_g/2` Doppler guard columns on both sides of the pilot and guard
//! rows. Received samples in the pilot block then depend only on pilots and the
//! truncated channel, never on data.
//!
//! The measurement vector is scaled so that `y ≈ Ψ h` where `h` is the
//! vectorized truncated delay-Doppler-angle channel: `y = N · N_t · Y_dd`.

use crate::channel::{self, SupportDims};
use crate::error::{cfg_err, dim_err, Result};
use crate::modem::{DelayDopplerFrame, OtfsConfig};
use crate::rng;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotDims {
    /// Pilot delay extent.
    pub m_tau: usize,
    /// Pilot Doppler extent (even).
    pub n_nu: usize,
    /// Delay guard and channel truncation.
    pub m_g: usize,
    /// Doppler guard and channel truncation (even).
    pub n_g: usize,
}

impl PilotDims {
    /// Guard/truncation sizes equal to the channel support.
    pub fn with_support(m_tau: usize, n_nu: usize, support: SupportDims) -> Self {
        Self { m_tau, n_nu, m_g: support.m_max, n_g: support.n_max }
    }

    pub fn rows(&self) -> usize {
        self.m_tau * self.n_nu
    }

    /// Columns of one angle block.
    pub fn block_cols(&self) -> usize {
        self.m_g * self.n_g
    }

    /// Pilot-plus-guard footprint `(M_tau + M_g)(N_nu + N_g)`.
    pub fn footprint(&self) -> usize {
        (self.m_tau + self.m_g) * (self.n_nu + self.n_g)
    }

    /// `η = (M_tau + M_g)(N_nu + N_g) / (M N)`.
    pub fn overhead(&self, cfg: &OtfsConfig) -> f64 {
        self.footprint() as f64 / (cfg.m * cfg.n) as f64
    }

    pub fn validate(&self, cfg: &OtfsConfig) -> Result<()> {
        if self.m_tau == 0 || self.n_nu == 0 || self.m_g == 0 || self.n_g == 0 {
            return Err(cfg_err(format!("pilot dimensions must be positive: {self:?}")));
        }
        if self.n_nu % 2 != 0 || self.n_g % 2 != 0 {
            return Err(cfg_err(format!("N_nu and N_g must be even: {self:?}")));
        }
        if self.m_tau + self.m_g > cfg.m || self.n_nu + self.n_g > cfg.n {
            return Err(cfg_err(format!(
                "pilot block plus guards ({} x {}) exceeds the frame ({} x {})",
                self.m_tau + self.m_g,
                self.n_nu + self.n_g,
                cfg.m,
                cfg.n
            )));
        }
        Ok(())
    }

    /// Checks the support requirements `M_tau ≥ M_max`, `N_nu ≥ N_max`,
    /// `M_g ≥ M_max - 1`, `N_g/2 ≥ N_max/2 - 1`.
    pub fn validate_support(&self, support: SupportDims) -> Result<()> {
        if self.m_tau < support.m_max || self.n_nu < support.n_max {
            return Err(cfg_err(format!(
                "pilot block ({}, {}) smaller than channel support ({}, {})",
                self.m_tau, self.n_nu, support.m_max, support.n_max
            )));
        }
        if self.m_g + 1 < support.m_max || self.n_g / 2 + 1 < support.n_max / 2 {
            return Err(cfg_err(format!(
                "guards ({}, {}) too small for channel support ({}, {})",
                self.m_g, self.n_g, support.m_max, support.n_max
            )));
        }
        Ok(())
    }

    /// Row of `(ℓ, k)`: `ℓ N_nu + k + N_nu/2`.
    pub fn row_index(&self, l: usize, k: i64) -> usize {
        l * self.n_nu + (k + (self.n_nu / 2) as i64) as usize
    }

    /// Inverse of [`PilotDims::row_index`].
    pub fn row_pair(&self, row: usize) -> (usize, i64) {
        (row / self.n_nu, (row % self.n_nu) as i64 - (self.n_nu / 2) as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellRole {
    Pilot,
    Guard,
    Data,
}

/// Role of grid cell `(row, col)` under the layout of `dims`.
pub fn cell_role(dims: &PilotDims, cfg: &OtfsConfig, row: usize, col: usize) -> CellRole {
    let k = cfg.doppler_index(col);
    let half_nu = (dims.n_nu / 2) as i64;
    let half_g = (dims.n_g / 2) as i64;
    let in_pilot_cols = (-half_nu..half_nu).contains(&k);
    let in_footprint_cols = (-half_nu - half_g..half_nu + half_g).contains(&k);
    let in_pilot_rows = row < dims.m_tau;
    let in_guard_rows = row >= cfg.m - dims.m_g;
    if in_pilot_rows && in_pilot_cols {
        CellRole::Pilot
    } else if (in_pilot_rows || in_guard_rows) && in_footprint_cols {
        CellRole::Guard
    } else {
        CellRole::Data
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotPattern {
    pub dims: PilotDims,
    /// `x[ℓ, k + N_nu/2, p]`.
    pub pilots: Array3<Complex64>,
}

impl PilotPattern {
    pub fn n_t(&self) -> usize {
        self.pilots.dim().2
    }
}

/// i.i.d. `CN(0, 1)` pilots, fully overlapped across antennas.
pub fn gen_pilots(dims: &PilotDims, n_t: usize, seed: u64) -> PilotPattern {
    let mut r = rng::rng(seed);
    let pilots = Array3::from_shape_fn((dims.m_tau, dims.n_nu, n_t), |_| rng::complex_gaussian(&mut r, 1.0));
    PilotPattern { dims: *dims, pilots }
}

/// Builds the transmit frame of antenna `p`: pilots in the pilot block, zero
/// guards, and `data` (if any) on the remaining cells.
pub fn embed_pilots(
    pattern: &PilotPattern,
    p: usize,
    cfg: &OtfsConfig,
    data: Option<&Array2<Complex64>>,
) -> Result<DelayDopplerFrame> {
    pattern.dims.validate(cfg)?;
    if p >= pattern.n_t() {
        return Err(dim_err(format!("antenna {p} out of range for {} antennas", pattern.n_t())));
    }
    if let Some(d) = data {
        if d.dim() != (cfg.m, cfg.n) {
            return Err(dim_err(format!("data grid is {:?}, expected ({}, {})", d.dim(), cfg.m, cfg.n)));
        }
    }
    let dims = pattern.dims;
    let offset = cfg.n / 2 - dims.n_nu / 2;
    let grid = Array2::from_shape_fn((cfg.m, cfg.n), |(row, col)| match cell_role(&dims, cfg, row, col) {
        CellRole::Pilot => pattern.pilots[[row, col - offset, p]],
        CellRole::Guard => Complex64::new(0.0, 0.0),
        CellRole::Data => data.map_or(Complex64::new(0.0, 0.0), |d| d[[row, col]]),
    });
    DelayDopplerFrame::from_grid(grid)
}

/// Reads the received pilot block into `y` (row order of [`PilotDims::row_index`]),
/// scaled by `N · N_t`.
pub fn extract_received_pilots(y_dd: &DelayDopplerFrame, dims: &PilotDims, cfg: &OtfsConfig, n_t: usize) -> Result<Vec<Complex64>> {
    dims.validate(cfg)?;
    if y_dd.dims() != (cfg.m, cfg.n) {
        return Err(dim_err(format!("received frame is {:?}, expected ({}, {})", y_dd.dims(), cfg.m, cfg.n)));
    }
    let scale = (cfg.n * n_t) as f64;
    let mut y = Vec::with_capacity(dims.rows());
    for row in 0..dims.rows() {
        let (l, k) = dims.row_pair(row);
        y.push(y_dd.grid()[[l, cfg.doppler_col(k)]] * scale);
    }
    Ok(y)
}

/// `z[ℓ, k, r] = Σ_p exp(-j2π r p / N_t) x[ℓ, k, p]`, `r` stored at `r + N_t/2`.
pub fn angle_transform_pilots(pilots: &Array3<Complex64>) -> Result<Array3<Complex64>> {
    let (m, n, n_t) = pilots.dim();
    if n_t == 0 || n_t % 2 != 0 {
        return Err(dim_err(format!("N_t must be even and positive, got {n_t}")));
    }
    let half = (n_t / 2) as i64;
    let twiddle = Array2::from_shape_fn((n_t, n_t), |(ri, p)| {
        Complex64::from_polar(1.0, -2.0 * PI * ((ri as i64 - half) * p as i64) as f64 / n_t as f64)
    });
    let mut z = Array3::zeros((m, n, n_t));
    for l in 0..m {
        for k in 0..n {
            for ri in 0..n_t {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..n_t {
                    acc += twiddle[[ri, p]] * pilots[[l, k, p]];
                }
                z[[l, k, ri]] = acc;
            }
        }
    }
    Ok(z)
}

/// `W[row(ℓ, k), col(ℓ', k')] = exp(j2π (ℓ - ℓ') k' / (N (M + N_cp)))`.
pub fn build_phase_matrix(dims: &PilotDims, cfg: &OtfsConfig) -> Array2<Complex64> {
    Array2::from_shape_fn((dims.rows(), dims.block_cols()), |(row, col)| {
        let (l, _) = dims.row_pair(row);
        let (lp, kp) = block_pair(dims, col);
        cfg.dd_phase(l as i64 - lp as i64, kp)
    })
}

fn block_pair(dims: &PilotDims, col: usize) -> (usize, i64) {
    (col / dims.n_g, (col % dims.n_g) as i64 - (dims.n_g / 2) as i64)
}

/// `Z_{c,r}[row(ℓ, k), col(ℓ', k')] = z[ℓ - ℓ', k - k', r]`, zero when the
/// pilot index falls outside the pilot block (those cells are guards).
pub fn build_conv_matrix(z: &Array3<Complex64>, dims: &PilotDims, r: i64) -> Result<Array2<Complex64>> {
    let (m_tau, n_nu, n_t) = z.dim();
    if (m_tau, n_nu) != (dims.m_tau, dims.n_nu) {
        return Err(dim_err(format!("z is {:?}, pilot block is ({}, {})", z.dim(), dims.m_tau, dims.n_nu)));
    }
    let half_t = (n_t / 2) as i64;
    if !(-half_t..half_t).contains(&r) {
        return Err(dim_err(format!("angle index {r} outside [-{half_t}, {half_t})")));
    }
    let ri = (r + half_t) as usize;
    let half_nu = (n_nu / 2) as i64;
    Ok(Array2::from_shape_fn((dims.rows(), dims.block_cols()), |(row, col)| {
        let (l, k) = dims.row_pair(row);
        let (lp, kp) = block_pair(dims, col);
        let dl = l as i64 - lp as i64;
        let dk = k - kp;
        if dl < 0 || dl >= m_tau as i64 || !(-half_nu..half_nu).contains(&dk) {
            Complex64::new(0.0, 0.0)
        } else {
            z[[dl as usize, (dk + half_nu) as usize, ri]]
        }
    }))
}

/// `Ψ = [W ⊙ Z_{c,-N_t/2}, …, W ⊙ Z_{c,N_t/2-1}]`.
pub fn assemble_sensing(w: &Array2<Complex64>, blocks: &[Array2<Complex64>]) -> Result<Array2<Complex64>> {
    let (rows, width) = w.dim();
    let mut psi = Array2::zeros((rows, width * blocks.len()));
    for (b, z) in blocks.iter().enumerate() {
        if z.dim() != w.dim() {
            return Err(dim_err(format!("convolution block {b} is {:?}, W is {:?}", z.dim(), w.dim())));
        }
        let mut dst = psi.slice_mut(ndarray::s![.., b * width..(b + 1) * width]);
        ndarray::Zip::from(&mut dst).and(w).and(z).for_each(|d, &a, &c| *d = a * c);
    }
    Ok(psi)
}

/// Measurement vector, sensing matrix and index maps of one pilot frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingSystem {
    pub y: Vec<Complex64>,
    pub psi: Array2<Complex64>,
    pub dims: PilotDims,
    pub n_t: usize,
}

impl SensingSystem {
    /// Builds `Ψ` for `pattern` and pairs it with the measurement `y`.
    pub fn build(pattern: &PilotPattern, cfg: &OtfsConfig, y: Vec<Complex64>) -> Result<Self> {
        let psi = sensing_matrix(pattern, cfg)?;
        if y.len() != psi.nrows() {
            return Err(dim_err(format!("y has {} entries, Ψ has {} rows", y.len(), psi.nrows())));
        }
        Ok(Self { y, psi, dims: pattern.dims, n_t: pattern.n_t() })
    }

    pub fn rows(&self) -> usize {
        self.psi.nrows()
    }

    pub fn cols(&self) -> usize {
        self.psi.ncols()
    }

    /// Column of `(ℓ', k', r)`.
    pub fn col_index(&self, l: usize, k: i64, r: i64) -> usize {
        channel::vec_index(l, k, r, self.dims.m_g, self.dims.n_g, self.n_t)
    }

    /// `(ℓ', k', r)` of a column.
    pub fn col_triple(&self, col: usize) -> (usize, i64, i64) {
        channel::vec_triple(col, self.dims.m_g, self.dims.n_g, self.n_t)
    }

    /// Binary dump: `rows`, `cols` as little-endian `u64`, then `Ψ` row-major
    /// and `y`, each entry a little-endian `(re, im)` pair of `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.rows() as u64).to_le_bytes())?;
        out.write_all(&(self.cols() as u64).to_le_bytes())?;
        for v in self.psi.iter().chain(self.y.iter()) {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }
}

/// `Ψ` for a pilot pattern.
pub fn sensing_matrix(pattern: &PilotPattern, cfg: &OtfsConfig) -> Result<Array2<Complex64>> {
    pattern.dims.validate(cfg)?;
    let z = angle_transform_pilots(&pattern.pilots)?;
    let w = build_phase_matrix(&pattern.dims, cfg);
    let half = (pattern.n_t() / 2) as i64;
    let blocks = (-half..half)
        .map(|r| build_conv_matrix(&z, &pattern.dims, r))
        .collect::<Result<Vec<_>>>()?;
    assemble_sensing(&w, &blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> OtfsConfig {
        OtfsConfig::new(32, 16, 4, 15e3, 2.15e9).unwrap()
    }

    fn dims() -> PilotDims {
        PilotDims { m_tau: 6, n_nu: 6, m_g: 3, n_g: 4 }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pilots_are_seeded_unit_power_and_uncorrelated() {
        let d = PilotDims { m_tau: 50, n_nu: 50, m_g: 1, n_g: 2 };
        let a = gen_pilots(&d, 4, 3);
        assert_eq!(a, gen_pilots(&d, 4, 3));
        let n = (d.m_tau * d.n_nu * 4) as f64;
        let power: f64 = a.pilots.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((power - 1.0).abs() < 0.05);
        let (mut cross, mut e0, mut e1) = (c(0.0, 0.0), 0.0, 0.0);
        for l in 0..d.m_tau {
            for k in 0..d.n_nu {
                let (x0, x1) = (a.pilots[[l, k, 0]], a.pilots[[l, k, 1]]);
                cross += x0 * x1.conj();
                e0 += x0.norm_sqr();
                e1 += x1.norm_sqr();
            }
        }
        assert!(cross.norm() / (e0 * e1).sqrt() < 0.05);
    }

    #[test]
    fn layout_roles() {
        let cfg = cfg();
        let d = dims();
        let pat = gen_pilots(&d, 2, 1);
        let frame = embed_pilots(&pat, 1, &cfg, None).unwrap();
        let data = Array2::from_elem((cfg.m, cfg.n), c(7.0, 0.0));
        let with_data = embed_pilots(&pat, 1, &cfg, Some(&data)).unwrap();
        let mut counts = [0usize; 3];
        for row in 0..cfg.m {
            for col in 0..cfg.n {
                let v = frame.grid()[[row, col]];
                let vd = with_data.grid()[[row, col]];
                match cell_role(&d, &cfg, row, col) {
                    CellRole::Pilot => {
                        counts[0] += 1;
                        assert_ne!(v, c(0.0, 0.0));
                        assert_eq!(v, vd);
                    }
                    CellRole::Guard => {
                        counts[1] += 1;
                        assert_eq!(v, c(0.0, 0.0));
                        assert_eq!(vd, c(0.0, 0.0));
                    }
                    CellRole::Data => {
                        counts[2] += 1;
                        assert_eq!(v, c(0.0, 0.0));
                        assert_eq!(vd, c(7.0, 0.0));
                    }
                }
            }
        }
        assert_eq!(counts[0], d.rows());
        assert_eq!(counts[0] + counts[1], d.footprint());
        assert!((d.overhead(&cfg) - d.footprint() as f64 / (cfg.m * cfg.n) as f64).abs() < 1e-15);
        // pilot (ℓ = 0, k = -N_nu/2) sits at column N/2 - N_nu/2
        assert_eq!(frame.grid()[[0, cfg.n / 2 - 3]], pat.pilots[[0, 0, 1]]);
    }

    #[test]
    fn oversize_layout_is_rejected() {
        let cfg = cfg();
        let d = PilotDims { m_tau: 30, n_nu: 6, m_g: 3, n_g: 4 };
        assert!(embed_pilots(&gen_pilots(&d, 2, 0), 0, &cfg, None).is_err());
        let odd = PilotDims { m_tau: 4, n_nu: 5, m_g: 3, n_g: 4 };
        assert!(odd.validate(&cfg).is_err());
    }

    #[test]
    fn support_requirements() {
        let s = SupportDims { m_max: 4, n_max: 4 };
        assert!(PilotDims { m_tau: 4, n_nu: 4, m_g: 3, n_g: 2 }.validate_support(s).is_ok());
        assert!(PilotDims { m_tau: 3, n_nu: 4, m_g: 3, n_g: 2 }.validate_support(s).is_err());
        assert!(PilotDims { m_tau: 4, n_nu: 4, m_g: 2, n_g: 2 }.validate_support(s).is_err());
    }

    #[test]
    fn extraction_and_row_map() {
        let cfg = cfg();
        let d = dims();
        let zero = DelayDopplerFrame::zeros(&cfg);
        assert!(extract_received_pilots(&zero, &d, &cfg, 2).unwrap().iter().all(|v| v.norm() == 0.0));
        for row in 0..d.rows() {
            let (l, k) = d.row_pair(row);
            assert_eq!(d.row_index(l, k), row);
        }
        let mut grid = Array2::zeros((cfg.m, cfg.n));
        grid[[2, cfg.doppler_col(-1)]] = c(1.0, 2.0);
        let y = extract_received_pilots(&DelayDopplerFrame::from_grid(grid).unwrap(), &d, &cfg, 2).unwrap();
        assert_eq!(y[d.row_index(2, -1)], c(1.0, 2.0) * (cfg.n * 2) as f64);
    }

    #[test]
    fn angle_transform_examples() {
        let mut x = Array3::zeros((2, 2, 4));
        x.fill(c(1.0, -0.5));
        let z = angle_transform_pilots(&x).unwrap();
        for ((_, _, ri), v) in z.indexed_iter() {
            let want = if ri == 2 { c(4.0, -2.0) } else { c(0.0, 0.0) };
            assert!((v - want).norm() < 1e-12);
        }
        let mut x = Array3::zeros((1, 1, 4));
        x[[0, 0, 0]] = c(0.3, 0.4);
        let z = angle_transform_pilots(&x).unwrap();
        assert!(z.iter().all(|v| (v - c(0.3, 0.4)).norm() < 1e-15));

        let x = gen_pilots(&dims(), 6, 8).pilots;
        let z = angle_transform_pilots(&x).unwrap();
        for ((l, k, ri), v) in z.indexed_iter() {
            let r = ri as f64 - 3.0;
            let want: Complex64 = (0..6).map(|p| x[[l, k, p]] * Complex64::from_polar(1.0, -2.0 * PI * r * p as f64 / 6.0)).sum();
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_matrix_examples() {
        let cfg = cfg();
        let d = dims();
        let w = build_phase_matrix(&d, &cfg);
        assert_eq!(w.dim(), (d.rows(), d.block_cols()));
        for ((row, col), v) in w.indexed_iter() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
            let (l, _) = d.row_pair(row);
            let (lp, kp) = block_pair(&d, col);
            if kp == 0 || l == lp {
                assert!((v - c(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn conv_matrix_examples() {
        let d = dims();
        let mut z = Array3::zeros((d.m_tau, d.n_nu, 2));
        z[[0, d.n_nu / 2, 1]] = c(1.0, 0.0);
        let zc = build_conv_matrix(&z, &d, 0).unwrap();
        for ((row, col), v) in zc.indexed_iter() {
            let (l, k) = d.row_pair(row);
            let (lp, kp) = block_pair(&d, col);
            let want = if l == lp && k == kp { 1.0 } else { 0.0 };
            assert_eq!(*v, c(want, 0.0));
        }
        assert!(build_conv_matrix(&z, &d, 1).is_err());

        let z = angle_transform_pilots(&gen_pilots(&d, 2, 4).pilots).unwrap();
        let zc = build_conv_matrix(&z, &d, -1).unwrap();
        let mut r = rng::rng(1);
        let h: Vec<Complex64> = (0..d.block_cols()).map(|_| rng::complex_gaussian(&mut r, 1.0)).collect();
        for row in 0..d.rows() {
            let (l, k) = d.row_pair(row);
            let mut want = c(0.0, 0.0);
            for lp in 0..d.m_g {
                for kp in -(d.n_g as i64 / 2)..(d.n_g as i64 / 2) {
                    let (dl, dk) = (l as i64 - lp as i64, k - kp);
                    if (0..d.m_tau as i64).contains(&dl) && (-3..3).contains(&dk) {
                        want += z[[dl as usize, (dk + 3) as usize, 0]] * h[lp * d.n_g + (kp + 2) as usize];
                    }
                }
            }
            let got: Complex64 = (0..d.block_cols()).map(|col| zc[[row, col]] * h[col]).sum();
            assert!((got - want).norm() < 1e-12);
        }

        // delay shift of z shifts the rows
        let mut shifted = Array3::zeros(z.dim());
        for ((l, k, ri), v) in z.indexed_iter() {
            if l + 1 < d.m_tau {
                shifted[[l + 1, k, ri]] = *v;
            }
        }
        let zs = build_conv_matrix(&shifted, &d, -1).unwrap();
        for row in d.n_nu..d.rows() {
            for col in 0..d.block_cols() {
                assert_eq!(zs[[row, col]], zc[[row - d.n_nu, col]]);
            }
        }
    }

    #[test]
    fn sensing_blocks_and_column_energy() {
        let cfg = cfg();
        let d = dims();
        let pat = gen_pilots(&d, 2, 6);
        let z = angle_transform_pilots(&pat.pilots).unwrap();
        let psi = sensing_matrix(&pat, &cfg).unwrap();
        assert_eq!(psi.ncols(), 2 * d.block_cols());
        for (b, r) in [-1i64, 0].iter().enumerate() {
            let zc = build_conv_matrix(&z, &d, *r).unwrap();
            for col in 0..d.block_cols() {
                let e_psi: f64 = psi.column(b * d.block_cols() + col).iter().map(|v| v.norm_sqr()).sum();
                let e_z: f64 = zc.column(col).iter().map(|v| v.norm_sqr()).sum();
                assert!((e_psi - e_z).abs() < 1e-10 * e_z.max(1.0));
            }
        }
        let w = build_phase_matrix(&d, &cfg);
        assert!(assemble_sensing(&w, &[Array2::zeros((2, 2))]).is_err());
    }

    #[test]
    fn binary_dump_layout() {
        let cfg = cfg();
        let pat = gen_pilots(&dims(), 2, 2);
        let rows = dims().rows();
        let sys = SensingSystem::build(&pat, &cfg, vec![c(1.5, -2.5); rows]).unwrap();
        let mut buf = Vec::new();
        sys.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * (sys.rows() * sys.cols() + rows));
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), sys.rows() as u64);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), sys.cols() as u64);
        let re = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        assert_eq!(re, sys.psi[[0, 0]].re);
        let tail = buf.len() - 16;
        assert_eq!(f64::from_le_bytes(buf[tail..tail + 8].try_into().unwrap()), 1.5);
        for col in 0..sys.cols() {
            let (l, k, r) = sys.col_triple(col);
            assert_eq!(sys.col_index(l, k, r), col);
        }
    }
}
