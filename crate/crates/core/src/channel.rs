//! Clustered time-variant MIMO channel and its delay-Doppler-space (DDS) and
//! delay-Doppler-angle (DDA) representations.
//!
//! Each of the `N_p` dominant paths has one delay shared by its `N_s`
//! subpaths; every subpath carries its own gain, Doppler shift and spatial
//! angle `ψ = (d/λ) sin θ` for a half-wavelength ULA at the base station.
//! Tensors are indexed `[ℓ, k + N/2, p]` (DDS) or `[ℓ, k + N/2, r + N_t/2]` (DDA).

use crate::error::{cfg_err, dim_err, Result};
use crate::modem::{OtfsConfig, TapChannel};
use crate::rng;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SubpathRepr", into = "SubpathRepr")]
pub struct Subpath {
    pub alpha: Complex64,
    /// Doppler frequency (Hz).
    pub nu: f64,
    /// Spatial angle in `[-1/2, 1/2)`.
    pub psi: f64,
}

#[derive(Serialize, Deserialize)]
struct SubpathRepr {
    alpha_re: f64,
    alpha_im: f64,
    nu: f64,
    psi: f64,
}

impl From<SubpathRepr> for Subpath {
    fn from(r: SubpathRepr) -> Self {
        Self { alpha: Complex64::new(r.alpha_re, r.alpha_im), nu: r.nu, psi: r.psi }
    }
}

impl From<Subpath> for SubpathRepr {
    fn from(s: Subpath) -> Self {
        Self { alpha_re: s.alpha.re, alpha_im: s.alpha.im, nu: s.nu, psi: s.psi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Delay shared by all subpaths (s).
    pub tau: f64,
    pub subpaths: Vec<Subpath>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn subpath_count(&self) -> usize {
        self.paths.iter().map(|p| p.subpaths.len()).sum()
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().flat_map(|p| &p.subpaths).map(|s| s.alpha.norm_sqr()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn default_pdp_decay() -> f64 {
    1.0
}

fn default_rolloff() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGenParams {
    /// Dominant paths `N_p`.
    pub n_paths: usize,
    /// Subpaths per dominant path `N_s`.
    pub n_subpaths: usize,
    /// User speed (m/s).
    pub speed: f64,
    /// Largest path delay (s).
    pub tau_max: f64,
    /// Half-width of each path's spatial-angle cluster. `None` selects
    /// `D / (2 N_t)` with `D = max(1, round(N_t / 10))`.
    #[serde(default)]
    pub angle_spread: Option<f64>,
    /// Exponential power-delay-profile constant: `P_i ∝ exp(-pdp_decay · i)`.
    #[serde(default = "default_pdp_decay")]
    pub pdp_decay: f64,
    /// Raised-cosine roll-off in `[0, 1]`.
    #[serde(default = "default_rolloff")]
    pub rolloff: f64,
    /// Round path delays to whole samples.
    #[serde(default)]
    pub on_grid_delays: bool,
}

impl ChannelGenParams {
    /// 6 paths × 20 subpaths at 360 km/h, 3 µs maximum delay.
    pub fn desk() -> Self {
        Self {
            n_paths: 6,
            n_subpaths: 20,
            speed: 50.0,
            tau_max: 3.0e-6,
            angle_spread: None,
            pdp_decay: default_pdp_decay(),
            rolloff: default_rolloff(),
            on_grid_delays: false,
        }
    }

    pub fn angle_spread_for(&self, n_t: usize) -> f64 {
        self.angle_spread
            .unwrap_or_else(|| default_burst_len(n_t) as f64 / (2.0 * n_t as f64))
    }

    /// Maximum Doppler `v / λ` (Hz).
    pub fn max_doppler(&self, cfg: &OtfsConfig) -> f64 {
        self.speed / cfg.wavelength()
    }

    pub fn validate(&self, cfg: &OtfsConfig, n_t: usize) -> Result<()> {
        if self.n_paths == 0 || self.n_subpaths == 0 {
            return Err(cfg_err("need at least one path and one subpath"));
        }
        if !(self.speed >= 0.0) {
            return Err(cfg_err(format!("speed must be non-negative, got {}", self.speed)));
        }
        let limit = cfg.n_cp as f64 * cfg.sample_interval();
        if !(self.tau_max >= 0.0) || self.tau_max >= limit {
            return Err(cfg_err(format!(
                "tau_max = {:e} s must lie in [0, N_cp T_s = {:e} s)",
                self.tau_max, limit
            )));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(cfg_err(format!("roll-off must lie in [0, 1], got {}", self.rolloff)));
        }
        let spread = self.angle_spread_for(n_t);
        if !(0.0..0.5).contains(&spread) {
            return Err(cfg_err(format!("angle spread must lie in [0, 1/2), got {spread}")));
        }
        Ok(())
    }
}

/// Default angle-burst length `max(1, round(N_t / 10))`.
pub fn default_burst_len(n_t: usize) -> usize {
    ((n_t as f64 / 10.0).round() as usize).max(1)
}

/// Finite delay/Doppler support of the DDA channel, in bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportDims {
    /// Delay support `[0, M_max - 1]`.
    pub m_max: usize,
    /// Doppler support `[-N_max/2, N_max/2 - 1]`; always even.
    pub n_max: usize,
}

/// `M_max = ⌈τ_max M Δf⌉ + 2`, `N_max = ⌈ν_max N T⌉ + 2` (rounded up to even),
/// both capped at the frame size.
pub fn support_dims(params: &ChannelGenParams, cfg: &OtfsConfig) -> SupportDims {
    let m_max = ((params.tau_max * cfg.m as f64 * cfg.delta_f - 1e-9).ceil().max(0.0) as usize + 2).min(cfg.m);
    let nu_max = 2.0 * params.max_doppler(cfg);
    let raw = (nu_max * cfg.n as f64 * cfg.symbol_duration() - 1e-9).ceil().max(0.0) as usize + 2;
    let n_max = (raw + raw % 2).min(cfg.n);
    SupportDims { m_max, n_max }
}

/// `Υ_N(x) = Σ_{n=1}^{N} exp(j 2π x (n-1) / N)`.
pub fn upsilon(x: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let denom = (PI * x / nf).sin();
    if denom.abs() < 1e-3 {
        return (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * x * i as f64 / nf))
            .sum();
    }
    Complex64::from_polar((PI * x).sin() / denom, PI * x * (nf - 1.0) / nf)
}

/// Raised-cosine pulse at `t` (in sample intervals), unit value at `t = 0`.
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let sinc = if t.abs() < 1e-12 { 1.0 } else { (PI * t).sin() / (PI * t) };
    if rolloff == 0.0 {
        return sinc;
    }
    let d = 2.0 * rolloff * t;
    if (1.0 - d * d).abs() < 1e-10 {
        return PI / 4.0 * raised_cosine_sinc(1.0 / (2.0 * rolloff));
    }
    sinc * (PI * rolloff * t).cos() / (1.0 - d * d)
}

fn raised_cosine_sinc(t: f64) -> f64 {
    (PI * t).sin() / (PI * t)
}

/// Delay pulse sampled on the tap grid `ℓ = 0..=L` and truncated to `|t| ≤ L T_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseShape {
    pub rolloff: f64,
    pub max_tap: usize,
}

impl PulseShape {
    pub fn new(rolloff: f64, max_tap: usize) -> Self {
        Self { rolloff, max_tap }
    }

    /// Default pulse for `cfg`: `L = N_cp - 1`.
    pub fn for_config(rolloff: f64, cfg: &OtfsConfig) -> Self {
        Self { rolloff, max_tap: cfg.n_cp.saturating_sub(1) }
    }

    /// `p_rc(ℓ T_s - τ)`; `tau` in seconds.
    pub fn tap(&self, l: usize, tau: f64, cfg: &OtfsConfig) -> f64 {
        if l > self.max_tap {
            return 0.0;
        }
        let t = l as f64 - tau / cfg.sample_interval();
        if t.abs() > self.max_tap as f64 {
            return 0.0;
        }
        raised_cosine(t, self.rolloff)
    }
}

/// Draws a clustered [`PathSet`], deterministic in `seed`.
pub fn generate_path_set(
    params: &ChannelGenParams,
    cfg: &OtfsConfig,
    n_t: usize,
    seed: u64,
) -> Result<PathSet> {
    params.validate(cfg, n_t)?;
    let mut rng = rng::rng(seed);
    let spread = params.angle_spread_for(n_t);
    let fd = params.max_doppler(cfg);
    let ts = cfg.sample_interval();

    let weights: Vec<f64> = (0..params.n_paths).map(|i| (-params.pdp_decay * i as f64).exp()).collect();
    let total: f64 = weights.iter().sum();

    let mut paths = Vec::with_capacity(params.n_paths);
    for w in weights {
        let mut tau = rng.random_range(0.0..=params.tau_max);
        if params.on_grid_delays {
            tau = ((tau / ts).round() * ts).min((params.tau_max / ts).floor() * ts);
        }
        let mean_psi = if spread > 0.0 {
            rng.random_range(-0.5 + spread..0.5 - spread)
        } else {
            rng.random_range(-0.5..0.5)
        };
        let sub_power = w / total / params.n_subpaths as f64;
        let subpaths = (0..params.n_subpaths)
            .map(|_| {
                let psi = if spread > 0.0 { mean_psi + rng.random_range(-spread..spread) } else { mean_psi };
                let phi: f64 = rng.random_range(-PI / 2.0..PI / 2.0);
                let alpha = rng::complex_gaussian(&mut rng, sub_power);
                Subpath { alpha, nu: fd * phi.sin(), psi }
            })
            .collect();
        paths.push(Path { tau, subpaths });
    }
    Ok(PathSet { paths })
}

fn check_antenna_count(n_t: usize) -> Result<()> {
    if n_t == 0 || n_t % 2 != 0 {
        return Err(dim_err(format!("N_t must be even and positive, got {n_t}")));
    }
    Ok(())
}

/// Per-antenna time-variant taps for every antenna in `antennas`:
/// `h[κ][ℓ][p] = Σ_i Σ_s α_s exp(j2π ν_s κ T_s) p_rc(ℓ T_s - τ_i) exp(-j2π p ψ_s)`,
/// `κ = 1 ..= (M + N_cp) N`.
pub fn antenna_taps(
    ps: &PathSet,
    cfg: &OtfsConfig,
    pulse: &PulseShape,
    antennas: &[usize],
) -> Vec<TapChannel> {
    let len = cfg.frame_len();
    let ts = cfg.sample_interval();
    let n_taps = pulse.max_tap + 1;
    let mut out: Vec<Array2<Complex64>> = antennas.iter().map(|_| Array2::zeros((len, n_taps))).collect();

    let mut time_phase = vec![Complex64::new(0.0, 0.0); len];
    let mut spatial = vec![Complex64::new(0.0, 0.0); antennas.len()];
    for path in &ps.paths {
        let delay: Vec<f64> = (0..n_taps).map(|l| pulse.tap(l, path.tau, cfg)).collect();
        // g[κ, a] = Σ_s α_s exp(j2π ν_s κ T_s) exp(-j2π p_a ψ_s)
        let mut g = Array2::<Complex64>::zeros((len, antennas.len()));
        for sp in &path.subpaths {
            for (kappa, v) in time_phase.iter_mut().enumerate() {
                *v = sp.alpha * Complex64::from_polar(1.0, 2.0 * PI * sp.nu * (kappa + 1) as f64 * ts);
            }
            for (a, &p) in antennas.iter().enumerate() {
                spatial[a] = Complex64::from_polar(1.0, -2.0 * PI * p as f64 * sp.psi);
            }
            for (kappa, mut row) in g.rows_mut().into_iter().enumerate() {
                let t = time_phase[kappa];
                for (v, s) in row.iter_mut().zip(&spatial) {
                    *v += t * s;
                }
            }
        }
        for (a, taps) in out.iter_mut().enumerate() {
            for (l, &d) in delay.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let mut col = taps.column_mut(l);
                for (kappa, v) in col.iter_mut().enumerate() {
                    *v += g[[kappa, a]] * d;
                }
            }
        }
    }
    out.into_iter().map(|taps| TapChannel { taps }).collect()
}

/// Time-variant taps of antenna `p` with channel length `pulse.max_tap`.
pub fn time_variant_taps(
    ps: &PathSet,
    cfg: &OtfsConfig,
    pulse: &PulseShape,
    p: usize,
) -> Result<TapChannel> {
    if pulse.max_tap >= cfg.n_cp.max(1) && cfg.n_cp > 0 {
        return Err(cfg_err(format!(
            "channel length L = {} must be below N_cp = {}",
            pulse.max_tap, cfg.n_cp
        )));
    }
    Ok(antenna_taps(ps, cfg, pulse, &[p]).remove(0))
}

/// Closed-form delay-Doppler-space response
/// `H[ℓ, k, p] = Σ β_s Υ_N(ν_s N T - k) p_rc(ℓ T_s - τ_i) exp(-j2π p ψ_s)`
/// with `β_s = α_s exp(j2π ν_s T_s)`.
pub fn dds_cir(ps: &PathSet, cfg: &OtfsConfig, pulse: &PulseShape, n_t: usize) -> Result<Array3<Complex64>> {
    check_antenna_count(n_t)?;
    let (m, n) = (cfg.m, cfg.n);
    let ts = cfg.sample_interval();
    let nt_bins = n as f64 * cfg.symbol_duration();
    let mut h = Array3::<Complex64>::zeros((m, n, n_t));
    for path in &ps.paths {
        // G[k, p] = Σ_s β_s Υ_N(ν_s N T - k) exp(-j2π p ψ_s)
        let mut g = Array2::<Complex64>::zeros((n, n_t));
        for sp in &path.subpaths {
            let beta = sp.alpha * Complex64::from_polar(1.0, 2.0 * PI * sp.nu * ts);
            let doppler: Vec<Complex64> = (0..n)
                .map(|col| beta * upsilon(sp.nu * nt_bins - cfg.doppler_index(col) as f64, n))
                .collect();
            let spatial: Vec<Complex64> =
                (0..n_t).map(|p| Complex64::from_polar(1.0, -2.0 * PI * p as f64 * sp.psi)).collect();
            for (col, d) in doppler.iter().enumerate() {
                for (p, s) in spatial.iter().enumerate() {
                    g[[col, p]] += d * s;
                }
            }
        }
        for l in 0..m {
            let d = pulse.tap(l, path.tau, cfg);
            if d == 0.0 {
                continue;
            }
            for ((col, p), v) in g.indexed_iter() {
                h[[l, col, p]] += v * d;
            }
        }
    }
    Ok(h)
}

/// Delay-Doppler-angle channel tensor `[ℓ, k + N/2, r + N_t/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DdaChannel {
    pub tensor: Array3<Complex64>,
}

impl DdaChannel {
    pub fn n_t(&self) -> usize {
        self.tensor.dim().2
    }

    /// The `M_g × N_g × N_t` block `ℓ ∈ [0, M_g-1]`, `k ∈ [-N_g/2, N_g/2-1]`.
    pub fn truncated(&self, m_g: usize, n_g: usize) -> Result<Array3<Complex64>> {
        let (m, n, n_t) = self.tensor.dim();
        check_truncation(m, n, m_g, n_g)?;
        let offset = n / 2 - n_g / 2;
        Ok(Array3::from_shape_fn((m_g, n_g, n_t), |(l, kc, r)| self.tensor[[l, kc + offset, r]]))
    }
}

fn check_truncation(m: usize, n: usize, m_g: usize, n_g: usize) -> Result<()> {
    if m_g > m || n_g > n {
        return Err(dim_err(format!("truncation ({m_g}, {n_g}) exceeds channel ({m}, {n})")));
    }
    if n_g % 2 != 0 {
        return Err(dim_err(format!("N_g must be even, got {n_g}")));
    }
    Ok(())
}

fn angle_dft(input: &Array3<Complex64>, sign: f64, scale: f64) -> Array3<Complex64> {
    let (m, n, n_t) = input.dim();
    let half = (n_t / 2) as i64;
    // twiddle[r_idx][p] = exp(sign j2π r p / N_t), r = r_idx - N_t/2
    let twiddle = Array2::from_shape_fn((n_t, n_t), |(ri, p)| {
        Complex64::from_polar(1.0, sign * 2.0 * PI * ((ri as i64 - half) * p as i64) as f64 / n_t as f64)
    });
    let mut out = Array3::zeros((m, n, n_t));
    for l in 0..m {
        for c in 0..n {
            for ri in 0..n_t {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..n_t {
                    acc += input[[l, c, p]] * twiddle[[ri, p]];
                }
                out[[l, c, ri]] = acc * scale;
            }
        }
    }
    out
}

/// `H_dda[ℓ, k, r] = Σ_p H_dds[ℓ, k, p] exp(j2π r p / N_t)`, unnormalized.
pub fn dda_channel(dds: &Array3<Complex64>) -> Result<DdaChannel> {
    check_antenna_count(dds.dim().2)?;
    Ok(DdaChannel { tensor: angle_dft(dds, 1.0, 1.0) })
}

/// Inverse of [`dda_channel`]: `H_dds[ℓ, k, p] = (1/N_t) Σ_r H_dda[ℓ, k, r] exp(-j2π r p / N_t)`.
pub fn dds_from_dda(dda: &DdaChannel) -> Array3<Complex64> {
    let (m, n, n_t) = dda.tensor.dim();
    let half = (n_t / 2) as i64;
    let mut out = Array3::zeros((m, n, n_t));
    for l in 0..m {
        for c in 0..n {
            for p in 0..n_t {
                let mut acc = Complex64::new(0.0, 0.0);
                for ri in 0..n_t {
                    let r = ri as i64 - half;
                    acc += dda.tensor[[l, c, ri]]
                        * Complex64::from_polar(1.0, -2.0 * PI * (r * p as i64) as f64 / n_t as f64);
                }
                out[[l, c, p]] = acc / n_t as f64;
            }
        }
    }
    out
}

/// Position of `(ℓ', k', r)` in the vectorized truncated channel (0-based):
/// `(r + N_t/2) M_g N_g + ℓ' N_g + k' + N_g/2`.
pub fn vec_index(l: usize, k: i64, r: i64, m_g: usize, n_g: usize, n_t: usize) -> usize {
    let ri = (r + (n_t / 2) as i64) as usize;
    let kc = (k + (n_g / 2) as i64) as usize;
    ri * m_g * n_g + l * n_g + kc
}

/// Inverse of [`vec_index`]: `(ℓ', k', r)`.
pub fn vec_triple(idx: usize, m_g: usize, n_g: usize, n_t: usize) -> (usize, i64, i64) {
    let block = m_g * n_g;
    let ri = idx / block;
    let within = idx % block;
    let l = within / n_g;
    let kc = within % n_g;
    (l, kc as i64 - (n_g / 2) as i64, ri as i64 - (n_t / 2) as i64)
}

/// Vectorizes the truncated DDA channel: angle blocks in ascending `r`, each
/// block ordered by `ℓ' N_g + k' + N_g/2`.
pub fn truncate_and_vectorize(dda: &DdaChannel, m_g: usize, n_g: usize) -> Result<Vec<Complex64>> {
    let t = dda.truncated(m_g, n_g)?;
    Ok(vectorize_truncated(&t))
}

pub fn vectorize_truncated(t: &Array3<Complex64>) -> Vec<Complex64> {
    let (m_g, n_g, n_t) = t.dim();
    let mut h = vec![Complex64::new(0.0, 0.0); m_g * n_g * n_t];
    for ((l, kc, ri), v) in t.indexed_iter() {
        h[ri * m_g * n_g + l * n_g + kc] = *v;
    }
    h
}

/// Rebuilds the `M_g × N_g × N_t` tensor from its vectorized form.
pub fn invec(h: &[Complex64], m_g: usize, n_g: usize, n_t: usize) -> Result<Array3<Complex64>> {
    if h.len() != m_g * n_g * n_t {
        return Err(dim_err(format!(
            "vector of length {} cannot be shaped ({m_g}, {n_g}, {n_t})",
            h.len()
        )));
    }
    Ok(Array3::from_shape_fn((m_g, n_g, n_t), |(l, kc, ri)| h[ri * m_g * n_g + l * n_g + kc]))
}

/// Places a truncated tensor back into a zero `M × N × N_t` tensor.
pub fn embed_truncated(t: &Array3<Complex64>, m: usize, n: usize) -> Result<Array3<Complex64>> {
    let (m_g, n_g, n_t) = t.dim();
    check_truncation(m, n, m_g, n_g)?;
    let offset = n / 2 - n_g / 2;
    let mut out = Array3::zeros((m, n, n_t));
    for ((l, kc, ri), v) in t.indexed_iter() {
        out[[l, kc + offset, ri]] = *v;
    }
    Ok(out)
}

pub fn energy<'a, I: IntoIterator<Item = &'a Complex64>>(values: I) -> f64 {
    values.into_iter().map(|v| v.norm_sqr()).sum()
}
