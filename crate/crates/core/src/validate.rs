//! Fast self-checks of the signal chain and estimators, each reporting a
//! measured figure against its tolerance.

use crate::channel::{
    dda_channel, dds_cir, generate_path_set, time_variant_taps, truncate_and_vectorize, vec_index, ChannelGenParams,
    Path, PathSet, PulseShape, Subpath,
};
use crate::error::Result;
use crate::estimators::{burst_start, nmse_dda, omp, somp3d, SompParams, TruncDims};
use crate::link;
use crate::modem::{self, compute_h_dd, lemma1_predict, DelayDopplerFrame, OtfsConfig, TapChannel};
use crate::pilot::{embed_pilots, extract_received_pilots, gen_pilots, sensing_matrix, PilotDims};
use crate::rng;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Runs every check in order.
pub fn run_all() -> Result<Vec<Check>> {
    Ok(vec![
        transforms()?,
        predictor_decay()?,
        closed_form_response()?,
        sensing_model()?,
        lifting()?,
        noiseless_recovery()?,
    ])
}

fn random_grid(m: usize, n: usize, seed: u64) -> Array2<Complex64> {
    let mut r = rng::rng(seed);
    Array2::from_shape_fn((m, n), |_| rng::complex_gaussian(&mut r, 1.0))
}

fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn rel_diff<'a>(a: impl IntoIterator<Item = &'a Complex64>, b: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.into_iter().zip(b) {
        num += (x - y).norm_sqr();
        den += y.norm_sqr();
    }
    (num / den).sqrt()
}

/// Transform and modem round trips.
pub fn transforms() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (i, &(m, n)) in [(16, 8), (64, 16)].iter().enumerate() {
        let x = random_grid(m, n, 100 + i as u64);
        worst = worst.max(max_abs_diff(&modem::sfft(&modem::isfft(&x)?)?, &x));
        let cfg = OtfsConfig::new(m, n, 4, 15e3, 2.15e9)?;
        let frame = DelayDopplerFrame::from_grid(x.clone())?;
        let back = modem::otfs_demodulate(&modem::otfs_modulate(&frame, &cfg)?, &cfg)?;
        worst = worst.max(max_abs_diff(back.grid(), &x));
    }
    Ok(Check::new("transforms", worst < 1e-10, format!("max error {worst:.3e}")))
}

/// Input-output predictor error through a slowly varying channel, N = 8..64.
pub fn predictor_decay() -> Result<Check> {
    let terms = [(0, 0.0, Complex64::new(0.9, 0.0)), (1, 1.0, Complex64::new(0.3, -0.2)), (2, -0.7, Complex64::new(0.0, 0.25))];
    let mut errs = Vec::new();
    for &n in &[8, 16, 32, 64] {
        let cfg = OtfsConfig::new(32, n, 4, 15e3, 1e9)?;
        let denom = (cfg.n * cfg.symbol_len()) as f64;
        let mut taps = Array2::zeros((cfg.frame_len(), 3));
        for &(l, f, g) in &terms {
            for kappa in 0..cfg.frame_len() {
                taps[[kappa, l]] += g * Complex64::from_polar(1.0, 2.0 * PI * f * kappa as f64 / denom);
            }
        }
        let ch = TapChannel::new(taps)?;
        let x = DelayDopplerFrame::from_grid(random_grid(32, n, 17))?;
        let r = modem::apply_channel(&modem::otfs_modulate(&x, &cfg)?, &ch, 0.0, 0)?;
        let y = modem::otfs_demodulate(&r, &cfg)?.into_grid().mapv(|v| v * n as f64);
        let pred = lemma1_predict(&x, &compute_h_dd(&ch, &cfg)?, &cfg)?;
        errs.push(rel_diff(&y, pred.grid()));
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let last = errs[errs.len() - 1];
    let detail = errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ");
    Ok(Check::new("predictor_decay", decreasing && last < 5e-2, format!("relative error over N=8..64: {detail}")))
}

/// Closed-form delay-Doppler-space response against the DFT of the taps.
pub fn closed_form_response() -> Result<Check> {
    let cfg = OtfsConfig::new(64, 16, 16, 15e3, 2.15e9)?;
    let n_t = 16;
    let pulse = PulseShape::for_config(0.3, &cfg);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let ps = generate_path_set(&ChannelGenParams::desk(), &cfg, n_t, seed)?;
        let dds = dds_cir(&ps, &cfg, &pulse, n_t)?;
        for p in [0, n_t / 2, n_t - 1] {
            let h_dd = compute_h_dd(&time_variant_taps(&ps, &cfg, &pulse, p)?, &cfg)?;
            worst = worst.max(rel_diff(dds.index_axis(ndarray::Axis(2), p), &h_dd));
        }
    }
    Ok(Check::new("closed_form_response", worst < 1e-10, format!("max relative error {worst:.3e}")))
}

/// Sensing model against the full chain for an on-grid channel at N = 64.
pub fn sensing_model() -> Result<Check> {
    let cfg = OtfsConfig::new(64, 64, 4, 15e3, 2.15e9)?;
    let n_t = 4;
    let dims = PilotDims { m_tau: 8, n_nu: 8, m_g: 4, n_g: 4 };
    let ps = on_grid(&cfg, n_t, &[(0, 0, -1, Complex64::new(0.8, 0.0)), (2, 1, 1, Complex64::new(0.0, 0.5))]);
    let pulse = PulseShape::for_config(0.3, &cfg);
    let pattern = gen_pilots(&dims, n_t, 3);
    let frames = (0..n_t).map(|p| embed_pilots(&pattern, p, &cfg, None)).collect::<Result<Vec<_>>>()?;
    let y = extract_received_pilots(&link::receive(&frames, &ps, &cfg, &pulse, 0.0, 0)?, &dims, &cfg, n_t)?;
    let psi = sensing_matrix(&pattern, &cfg)?;
    let h = truncate_and_vectorize(&dda_channel(&dds_cir(&ps, &cfg, &pulse, n_t)?)?, dims.m_g, dims.n_g)?;
    let model: Vec<Complex64> = psi.rows().into_iter().map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum()).collect();
    let e = rel_diff(&model, &y);
    Ok(Check::new("sensing_model", e < 1e-2, format!("relative residual {e:.3e}")))
}

fn on_grid(cfg: &OtfsConfig, n_t: usize, bins: &[(usize, i64, i64, Complex64)]) -> PathSet {
    let ts = cfg.sample_interval();
    let frame_time = cfg.n as f64 * cfg.symbol_duration();
    PathSet {
        paths: bins
            .iter()
            .map(|&(l, k, r, alpha)| Path {
                tau: l as f64 * ts,
                subpaths: vec![Subpath { alpha, nu: k as f64 / frame_time, psi: r as f64 / n_t as f64 }],
            })
            .collect(),
    }
}

/// Burst-start detection for every window position and length, N_t ≤ 16.
pub fn lifting() -> Result<Check> {
    let mut cases = 0;
    let mut misses = 0;
    for n_t in 1..=16 {
        for d in 1..=n_t {
            for s in 0..n_t {
                let mut e = vec![0.0; n_t];
                for j in 0..d {
                    e[(s + j) % n_t] = 1.0;
                }
                let got = burst_start(&e, d)?;
                // a full-width window matches at every start
                if got != s && d != n_t {
                    misses += 1;
                }
                cases += 1;
            }
        }
    }
    Ok(Check::new("lifting", misses == 0, format!("{misses} misses over {cases} cases")))
}

/// Noiseless single-path recovery by 3D-SOMP and OMP over 20 seeds.
pub fn noiseless_recovery() -> Result<Check> {
    let cfg = OtfsConfig::new(64, 16, 16, 15e3, 2.15e9)?;
    let n_t = 8;
    let dims = PilotDims { m_tau: 16, n_nu: 8, m_g: 4, n_g: 4 };
    let trunc = TruncDims { m_g: dims.m_g, n_g: dims.n_g, n_t };
    let params = SompParams { n_p: 1, d: 2, epsilon: 0.9 };
    let mut ok = 0;
    let trials = 20;
    for seed in 0..trials {
        let mut r = rng::rng(1000 + seed);
        let psi = sensing_matrix(&gen_pilots(&dims, n_t, seed), &cfg)?;
        let l = (seed as usize) % dims.m_g;
        let start = (seed as i64 * 3) % n_t as i64 - n_t as i64 / 2;
        let mut h = vec![Complex64::new(0.0, 0.0); trunc.cols()];
        for k in -1..1 {
            for j in 0..params.d as i64 {
                let ang = (start + j + n_t as i64 / 2).rem_euclid(n_t as i64) - n_t as i64 / 2;
                h[vec_index(l, k, ang, dims.m_g, dims.n_g, n_t)] = rng::complex_gaussian(&mut r, 1.0);
            }
        }
        let y: Vec<Complex64> = psi.rows().into_iter().map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum()).collect();
        let truth = Array3::from_shape_vec((1, 1, h.len()), h.clone()).expect("shape");
        let score = |est: &[Complex64]| -> Result<f64> {
            nmse_dda(&Array3::from_shape_vec((1, 1, est.len()), est.to_vec()).expect("shape"), &truth)
        };
        let s = score(&somp3d(&y, &psi, trunc, &params)?.h_hat)?;
        let o = score(&omp(&y, &psi, 2 * params.d)?.h_hat)?;
        if s < 1e-4 && o < 1e-4 {
            ok += 1;
        }
    }
    Ok(Check::new("noiseless_recovery", ok * 100 >= 95 * trials, format!("{ok}/{trials} instances recovered")))
}
