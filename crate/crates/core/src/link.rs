//! Multi-antenna downlink through the time-variant channel: per-antenna OTFS
//! modulation, per-antenna taps, superposition at the single-antenna user.

use crate::channel::{antenna_taps, PathSet, PulseShape};
use crate::error::{dim_err, Result};
use crate::modem::{self, DelayDopplerFrame, OtfsConfig, TimeDomainSignal};

/// Noiseless received signal `Σ_p h_p * s_p` for the per-antenna frames.
pub fn received_signal(
    frames: &[DelayDopplerFrame],
    ps: &PathSet,
    cfg: &OtfsConfig,
    pulse: &PulseShape,
) -> Result<TimeDomainSignal> {
    if frames.is_empty() {
        return Err(dim_err("need at least one transmit frame"));
    }
    let antennas: Vec<usize> = (0..frames.len()).collect();
    let taps = antenna_taps(ps, cfg, pulse, &antennas);
    let mut total = TimeDomainSignal::zeros(cfg);
    for (frame, ch) in frames.iter().zip(&taps) {
        let s = modem::otfs_modulate(frame, cfg)?;
        total.accumulate(&modem::apply_channel(&s, ch, 0.0, 0)?)?;
    }
    Ok(total)
}

/// Received delay-Doppler frame with complex white noise of variance
/// `noise_power` per sample (and, the chain being unitary, per grid cell).
pub fn receive(
    frames: &[DelayDopplerFrame],
    ps: &PathSet,
    cfg: &OtfsConfig,
    pulse: &PulseShape,
    noise_power: f64,
    noise_seed: u64,
) -> Result<DelayDopplerFrame> {
    let mut r = received_signal(frames, ps, cfg, pulse)?;
    modem::add_noise(&mut r, noise_power, noise_seed);
    modem::otfs_demodulate(&r, cfg)
}

/// Signal energy of a time-domain signal.
pub fn signal_energy(s: &TimeDomainSignal) -> f64 {
    s.samples.iter().map(|v| v.norm_sqr()).sum()
}
