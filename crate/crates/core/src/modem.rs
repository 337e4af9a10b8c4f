//! Discrete-time OTFS modulation and demodulation over an OFDM core.
//!
//! Grids are stored `M × N` with the delay index `ℓ` on rows and the Doppler
//! index `k ∈ [-N/2, N/2-1]` at column `k + N/2`. All DFTs are unitary, so
//! `otfs_demodulate(otfs_modulate(X)) == X` for an identity channel. The
//! delay-Doppler input/output relation in that normalization is
//!
//! ```text
//! Y_phys = lemma1_predict(X, H_dd) / N
//! ```
//!
//! where `H_dd` is the unnormalized delay-Doppler response of [`compute_h_dd`].

use crate::dft::{self, Direction};
use crate::error::{cfg_err, dim_err, Result};
use crate::rng;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Speed of light used to turn carrier frequency into wavelength (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtfsConfig {
    /// Delay bins (subcarriers).
    pub m: usize,
    /// Doppler bins (OFDM symbols per frame).
    pub n: usize,
    /// Cyclic-prefix length in samples.
    pub n_cp: usize,
    /// Subcarrier spacing (Hz).
    pub delta_f: f64,
    /// Carrier frequency (Hz).
    pub f_c: f64,
}

impl OtfsConfig {
    pub fn new(m: usize, n: usize, n_cp: usize, delta_f: f64, f_c: f64) -> Result<Self> {
        let cfg = Self { m, n, n_cp, delta_f, f_c };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.m % 2 != 0 {
            return Err(cfg_err(format!("M must be even and >= 2, got {}", self.m)));
        }
        if self.n < 2 || self.n % 2 != 0 {
            return Err(cfg_err(format!("N must be even and >= 2, got {}", self.n)));
        }
        if !(self.delta_f > 0.0) || !self.delta_f.is_finite() {
            return Err(cfg_err(format!("subcarrier spacing must be positive, got {}", self.delta_f)));
        }
        if !(self.f_c > 0.0) || !self.f_c.is_finite() {
            return Err(cfg_err(format!("carrier frequency must be positive, got {}", self.f_c)));
        }
        Ok(())
    }

    /// `T_s = 1 / (M Δf)`.
    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    /// `T = (M + N_cp) T_s`.
    pub fn symbol_duration(&self) -> f64 {
        self.symbol_len() as f64 * self.sample_interval()
    }

    pub fn symbol_len(&self) -> usize {
        self.m + self.n_cp
    }

    pub fn frame_len(&self) -> usize {
        self.symbol_len() * self.n
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Storage column of Doppler index `k`, wrapping modulo `N`.
    pub fn doppler_col(&self, k: i64) -> usize {
        (k + (self.n / 2) as i64).rem_euclid(self.n as i64) as usize
    }

    /// Doppler index of storage column `col`.
    pub fn doppler_index(&self, col: usize) -> i64 {
        col as i64 - (self.n / 2) as i64
    }

    /// Representative of `k` modulo `N` in `[-N/2, N/2 - 1]`.
    pub fn wrap_doppler(&self, k: i64) -> i64 {
        self.doppler_index(self.doppler_col(k))
    }

    /// `exp(j 2π ℓ k / (N (M + N_cp)))`, the delay-Doppler compensation phase.
    pub fn dd_phase(&self, delay: i64, doppler: i64) -> Complex64 {
        let denom = (self.n * self.symbol_len()) as f64;
        Complex64::from_polar(1.0, 2.0 * PI * (delay * doppler) as f64 / denom)
    }
}

/// `M × N` grid of delay-Doppler symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayDopplerFrame {
    grid: Array2<Complex64>,
}

impl DelayDopplerFrame {
    pub fn zeros(cfg: &OtfsConfig) -> Self {
        Self { grid: Array2::zeros((cfg.m, cfg.n)) }
    }

    pub fn from_grid(grid: Array2<Complex64>) -> Result<Self> {
        if grid.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(dim_err("delay-Doppler frame has non-finite entries"));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Array2<Complex64> {
        &self.grid
    }

    pub fn grid_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.grid
    }

    pub fn into_grid(self) -> Array2<Complex64> {
        self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dim()
    }

    /// Element `(ℓ, k)` with both indices taken modulo the frame size.
    pub fn at(&self, delay: i64, doppler: i64) -> Complex64 {
        let (m, n) = self.grid.dim();
        let row = delay.rem_euclid(m as i64) as usize;
        let col = (doppler + (n / 2) as i64).rem_euclid(n as i64) as usize;
        self.grid[[row, col]]
    }

    fn check(&self, cfg: &OtfsConfig) -> Result<()> {
        if self.grid.dim() != (cfg.m, cfg.n) {
            return Err(dim_err(format!(
                "frame is {:?}, configuration expects ({}, {})",
                self.grid.dim(),
                cfg.m,
                cfg.n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDomainSignal {
    pub samples: Vec<Complex64>,
}

impl TimeDomainSignal {
    pub fn zeros(cfg: &OtfsConfig) -> Self {
        Self { samples: vec![Complex64::new(0.0, 0.0); cfg.frame_len()] }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Adds `other` sample by sample (superposition of transmit antennas).
    pub fn accumulate(&mut self, other: &TimeDomainSignal) -> Result<()> {
        if other.len() != self.len() {
            return Err(dim_err(format!("cannot add signals of length {} and {}", self.len(), other.len())));
        }
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b;
        }
        Ok(())
    }
}

/// Linear time-variant channel `h[κ][ℓ]`.
///
/// Row `κ - 1` holds the taps at (1-based) sample time `κ`; column `ℓ` is the
/// tap delay in samples, `0..=L`.
#[derive(Clone, Debug, PartialEq)]
pub struct TapChannel {
    pub taps: Array2<Complex64>,
}

impl TapChannel {
    pub fn new(taps: Array2<Complex64>) -> Result<Self> {
        if taps.ncols() == 0 {
            return Err(dim_err("tap channel needs at least one tap"));
        }
        Ok(Self { taps })
    }

    /// `h[κ][0] = 1`, all other taps zero.
    pub fn identity(len: usize) -> Self {
        let mut taps = Array2::zeros((len, 1));
        taps.column_mut(0).fill(Complex64::new(1.0, 0.0));
        Self { taps }
    }

    /// Channel length `L` (the highest tap index).
    pub fn channel_length(&self) -> usize {
        self.taps.ncols() - 1
    }

    pub fn time_span(&self) -> usize {
        self.taps.nrows()
    }
}

fn check_grid(x: &Array2<Complex64>, what: &str) -> Result<()> {
    let (m, n) = x.dim();
    if m == 0 || n == 0 {
        return Err(dim_err(format!("{what}: empty grid")));
    }
    Ok(())
}

/// Inverse symplectic finite Fourier transform `F_M · X · F_N^H`.
pub fn isfft(x_dd: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    check_grid(x_dd, "isfft")?;
    let tmp = dft::along_columns(x_dd, Direction::Forward);
    Ok(dft::along_rows(&tmp, Direction::Inverse))
}

/// Symplectic finite Fourier transform `F_M^H · Y · F_N`.
pub fn sfft(y: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    check_grid(y, "sfft")?;
    let tmp = dft::along_columns(y, Direction::Inverse);
    Ok(dft::along_rows(&tmp, Direction::Forward))
}

/// OTFS modulation with all-ones transmit window.
///
/// The `F_M^H F_M` pair of the ISFFT and the OFDM IDFT cancels, leaving
/// `S = X · F_N^H`; each column then gets an `N_cp`-sample cyclic prefix and
/// the columns are read out in order.
pub fn otfs_modulate(x_dd: &DelayDopplerFrame, cfg: &OtfsConfig) -> Result<TimeDomainSignal> {
    x_dd.check(cfg)?;
    let s = dft::along_rows(x_dd.grid(), Direction::Inverse);
    let (m, n_cp) = (cfg.m, cfg.n_cp);
    let mut samples = Vec::with_capacity(cfg.frame_len());
    for col in s.columns() {
        for t in 0..n_cp {
            samples.push(col[(t as i64 - n_cp as i64).rem_euclid(m as i64) as usize]);
        }
        samples.extend(col.iter().copied());
    }
    Ok(TimeDomainSignal { samples })
}

/// `r_κ = Σ_ℓ h[κ][ℓ] s_{κ-ℓ} + v_κ` with zero prehistory and complex white
/// Gaussian noise of variance `noise_power`, drawn from `seed`.
pub fn apply_channel(
    s: &TimeDomainSignal,
    ch: &TapChannel,
    noise_power: f64,
    seed: u64,
) -> Result<TimeDomainSignal> {
    if ch.time_span() < s.len() {
        return Err(cfg_err(format!(
            "tap array covers {} samples but the frame has {}",
            ch.time_span(),
            s.len()
        )));
    }
    if !(noise_power >= 0.0) {
        return Err(cfg_err(format!("noise power must be non-negative, got {noise_power}")));
    }
    let taps = ch.taps.ncols();
    let mut out = Vec::with_capacity(s.len());
    for kappa in 0..s.len() {
        let row = ch.taps.row(kappa);
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..taps.min(kappa + 1) {
            acc += row[l] * s.samples[kappa - l];
        }
        out.push(acc);
    }
    let mut r = TimeDomainSignal { samples: out };
    add_noise(&mut r, noise_power, seed);
    Ok(r)
}

/// Adds circularly-symmetric complex Gaussian noise of variance `noise_power`.
pub fn add_noise(r: &mut TimeDomainSignal, noise_power: f64, seed: u64) {
    if noise_power <= 0.0 {
        return;
    }
    let mut rng = rng::rng(seed);
    for v in r.samples.iter_mut() {
        *v += rng::complex_gaussian(&mut rng, noise_power);
    }
}

/// OTFS demodulation with all-ones receive window: strip the cyclic prefix of
/// every received symbol and right-multiply by `F_N`.
pub fn otfs_demodulate(r: &TimeDomainSignal, cfg: &OtfsConfig) -> Result<DelayDopplerFrame> {
    if r.len() != cfg.frame_len() {
        return Err(dim_err(format!(
            "received signal has {} samples, expected (M + N_cp) N = {}",
            r.len(),
            cfg.frame_len()
        )));
    }
    let sym = cfg.symbol_len();
    let z = Array2::from_shape_fn((cfg.m, cfg.n), |(row, col)| r.samples[col * sym + cfg.n_cp + row]);
    Ok(DelayDopplerFrame { grid: dft::along_rows(&z, Direction::Forward) })
}

/// Delay-Doppler channel response
/// `H[ℓ, k] = Σ_i h[(i-1)(M+N_cp)+1][ℓ] · exp(-j 2π (i-1) k / N)`.
///
/// Taps beyond the channel length are zero.
pub fn compute_h_dd(ch: &TapChannel, cfg: &OtfsConfig) -> Result<Array2<Complex64>> {
    let sym = cfg.symbol_len();
    let needed = (cfg.n - 1) * sym + 1;
    if ch.time_span() < needed {
        return Err(dim_err(format!(
            "tap array covers {} samples, needs at least {needed}",
            ch.time_span()
        )));
    }
    let mut h_dd = Array2::zeros((cfg.m, cfg.n));
    let taps = ch.taps.ncols().min(cfg.m);
    for l in 0..taps {
        for col in 0..cfg.n {
            let k = cfg.doppler_index(col);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..cfg.n {
                let w = Complex64::from_polar(1.0, -2.0 * PI * (i as i64 * k) as f64 / cfg.n as f64);
                acc += ch.taps[[i * sym, l]] * w;
            }
            h_dd[[l, col]] = acc;
        }
    }
    Ok(h_dd)
}

/// Phase-compensated 2D periodic convolution
/// `Y[ℓ, k] = Σ X[ℓ', k'] H[ℓ-ℓ', k-k'] exp(j 2π ℓ (k-k') / (N (M+N_cp)))`.
///
/// `H` is periodic in both indices; the Doppler difference entering the phase
/// is taken in `[-N/2, N/2-1]`.
pub fn lemma1_predict(
    x_dd: &DelayDopplerFrame,
    h_dd: &Array2<Complex64>,
    cfg: &OtfsConfig,
) -> Result<DelayDopplerFrame> {
    x_dd.check(cfg)?;
    if h_dd.dim() != (cfg.m, cfg.n) {
        return Err(dim_err(format!("H_dd is {:?}, expected ({}, {})", h_dd.dim(), cfg.m, cfg.n)));
    }
    let (m, n) = (cfg.m, cfg.n);
    let x = x_dd.grid();
    let mut y = Array2::zeros((m, n));
    for ((d, hc), &h) in h_dd.indexed_iter() {
        if h == Complex64::new(0.0, 0.0) {
            continue;
        }
        let dk = cfg.doppler_index(hc);
        for l in 0..m {
            let coeff = h * cfg.dd_phase(l as i64, dk);
            let src_row = (l + m - d) % m;
            for col in 0..n {
                // (k - dk) in storage coordinates is (col - hc + N/2).
                let src_col = (col + n + n / 2 - hc) % n;
                y[[l, col]] += coeff * x[[src_row, src_col]];
            }
        }
    }
    Ok(DelayDopplerFrame { grid: y })
}
