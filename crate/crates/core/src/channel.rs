//! Lidar-to-target-to-lidar channel: delay, Doppler, delay on the signal,
//! lossless storage on the idler, and Bernoulli photon survival.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::GaussianAmplitude;
use crate::rng::{stream_rng, StreamDomain};

/// Hard cap on transmissions per episode.
pub const MAX_TRANSMISSIONS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Roundtrip delay.
    pub delta_t_s: f64,
    /// Doppler shift imposed at the target.
    pub delta_omega_s: f64,
    /// Idler storage time.
    pub delta_t_i: f64,
    /// Roundtrip transmissivity.
    pub eta: f64,
}

impl ChannelParams {
    pub fn lossless(delta_t_s: f64, delta_omega_s: f64, delta_t_i: f64) -> Self {
        ChannelParams {
            delta_t_s,
            delta_omega_s,
            delta_t_i,
            eta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_eta(self.eta)?;
        for (name, v) in [
            ("delta_t_s", self.delta_t_s),
            ("delta_omega_s", self.delta_omega_s),
            ("delta_t_i", self.delta_t_i),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Parameter vector `[delta_t_s, delta_omega_s]`.
    pub fn theta(&self) -> [f64; 2] {
        [self.delta_t_s, self.delta_omega_s]
    }
}

fn validate_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEta(eta))
    }
}

/// Physical target description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub range: f64,
    /// Positive for a target approaching the lidar.
    pub radial_velocity: f64,
    /// Signal carrier frequency.
    pub carrier: f64,
    pub light_speed: f64,
}

impl TargetTruth {
    pub fn validate(&self) -> Result<()> {
        if !(self.light_speed.is_finite() && self.light_speed > 0.0) {
            return Err(Error::InvalidTruth(format!("light speed {} must be positive", self.light_speed)));
        }
        if !(self.range.is_finite() && self.range >= 0.0) {
            return Err(Error::InvalidTruth(format!("range {} must be non-negative", self.range)));
        }
        if !(self.radial_velocity.abs() < self.light_speed) {
            return Err(Error::InvalidTruth(format!(
                "|v| = {} must be below c = {}",
                self.radial_velocity.abs(),
                self.light_speed
            )));
        }
        if !self.carrier.is_finite() {
            return Err(Error::InvalidTruth("carrier must be finite".into()));
        }
        Ok(())
    }
}

/// `delta_t_s = 2 r / c`, `delta_omega_s = 2 w_sc v / c`.
pub fn truth_to_channel(t: &TargetTruth, delta_t_i: f64, eta: f64) -> Result<ChannelParams> {
    t.validate()?;
    validate_eta(eta)?;
    Ok(ChannelParams {
        delta_t_s: 2.0 * t.range / t.light_speed,
        delta_omega_s: 2.0 * t.carrier * t.radial_velocity / t.light_speed,
        delta_t_i,
        eta,
    })
}

/// Inverts [`truth_to_channel`]: returns `(range, radial_velocity)`.
pub fn estimates_to_truth(delta_t: f64, delta_omega: f64, carrier: f64, light_speed: f64) -> Result<(f64, f64)> {
    if !(light_speed.is_finite() && light_speed > 0.0) {
        return Err(Error::InvalidTruth(format!("light speed {light_speed} must be positive")));
    }
    if carrier == 0.0 && delta_omega != 0.0 {
        return Err(Error::InvalidTruth("zero carrier cannot carry a Doppler shift".into()));
    }
    let v = if carrier == 0.0 {
        0.0
    } else {
        delta_omega * light_speed / (2.0 * carrier)
    };
    Ok((delta_t * light_speed / 2.0, v))
}

/// `D_t(dt/2) D_w(dw) D_t(dt/2)` on the signal coordinate. The result is
/// `psi(t - dt) exp(-i dw (t - dt/2))` in time representation.
pub fn apply_target_channel(
    state: &GaussianAmplitude,
    signal: usize,
    p: &ChannelParams,
) -> Result<GaussianAmplitude> {
    let half = 0.5 * p.delta_t_s;
    state
        .time_shift(signal, half)?
        .freq_shift(signal, p.delta_omega_s)?
        .time_shift(signal, half)
}

pub fn apply_idler_storage(state: &GaussianAmplitude, idler: usize, delta_t_i: f64) -> Result<GaussianAmplitude> {
    state.time_shift(idler, delta_t_i)
}

/// Signal channel followed by idler storage.
pub fn apply_channel_and_storage(
    state: &GaussianAmplitude,
    signal: usize,
    idler: usize,
    p: &ChannelParams,
) -> Result<GaussianAmplitude> {
    apply_idler_storage(&apply_target_channel(state, signal, p)?, idler, p.delta_t_i)
}

/// One Bernoulli(eta) survival draw; the first draw of the loss stream.
pub fn survival_trial(eta: f64, seed: u64, stream: u64) -> Result<bool> {
    validate_eta(eta)?;
    let mut rng = stream_rng(seed, StreamDomain::Loss, stream);
    Ok(rng.random::<f64>() < eta)
}

/// Number of transmissions up to and including the `k`-th return.
pub fn transmissions_until_k_returns(eta: f64, k: u64, seed: u64, stream: u64) -> Result<u64> {
    validate_eta(eta)?;
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, StreamDomain::Loss, stream);
    let mut returned = 0;
    let mut sent = 0;
    while returned < k {
        if sent == MAX_TRANSMISSIONS {
            return Err(Error::EpisodeOverflow(MAX_TRANSMISSIONS));
        }
        sent += 1;
        if rng.random::<f64>() < eta {
            returned += 1;
        }
    }
    Ok(sent)
}
