//! Single-photon lidar campaigns: lossless, lossy, and the unentangled
//! two-detection baseline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::biphoton::{build_biphoton, BiphotonParams, IDLER, SIGNAL};
use crate::bsi::{apply_bsi, estimate_from_outcomes, PairSelector};
use crate::channel::{apply_channel_and_storage, apply_target_channel, ChannelParams, MAX_TRANSMISSIONS};
use crate::error::{Error, Result};
use crate::estimation::{cr_rhs, product_bound, CostMatrix};
use crate::gaussian::{CoordLabel, GaussianAmplitude, MeasurementDensity, Rep};
use crate::rng::{stream_rng, StreamDomain};
use crate::stats::{BudgetStats, ParameterStats, ProductStats};

/// Smallest campaign accepted by the runners.
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub stream: u64,
    pub truth: ChannelParams,
    /// Signal frequency and idler arrival time; for the baseline, the
    /// arrival time of the time-committed photon and the frequency of the
    /// frequency-committed photon.
    pub outcomes: [f64; 2],
    /// `[delta_t, delta_omega]`.
    pub estimates: [f64; 2],
    pub transmissions_used: u64,
}

/// Bounds a campaign is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSummary {
    /// Single unentangled photon, simultaneous time and frequency readout.
    pub arthurs_kelly: f64,
    /// Joint bound on `rms_t * rms_w`.
    pub product_bound: f64,
    /// `(delta_t_min, delta_omega_min)`.
    pub marginal: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub n_trials: usize,
    pub seed: u64,
    pub delay: ParameterStats,
    pub doppler: ParameterStats,
    pub product: ProductStats,
    pub bounds: BoundSummary,
    pub budget: BudgetStats,
    pub records: Vec<TrialRecord>,
}

impl CampaignResult {
    fn from_records(seed: u64, truth: &ChannelParams, bounds: BoundSummary, records: Vec<TrialRecord>) -> Self {
        let dt: Vec<f64> = records.iter().map(|r| r.estimates[0]).collect();
        let dw: Vec<f64> = records.iter().map(|r| r.estimates[1]).collect();
        let et: Vec<f64> = dt.iter().map(|x| x - truth.delta_t_s).collect();
        let ew: Vec<f64> = dw.iter().map(|x| x - truth.delta_omega_s).collect();
        let counts: Vec<u64> = records.iter().map(|r| r.transmissions_used).collect();
        CampaignResult {
            n_trials: records.len(),
            seed,
            delay: ParameterStats::from_estimates(&dt, truth.delta_t_s),
            doppler: ParameterStats::from_estimates(&dw, truth.delta_omega_s),
            product: ProductStats::from_errors(&et, &ew),
            bounds,
            budget: BudgetStats::from_counts(&counts),
            records,
        }
    }

    /// One-sided test that neither rms sits more than `k` standard errors
    /// below its marginal bound.
    pub fn respects_marginal_bounds(&self, k: f64) -> bool {
        self.delay.rms + k * self.delay.rms_se >= self.bounds.marginal.0
            && self.doppler.rms + k * self.doppler.rms_se >= self.bounds.marginal.1
    }
}

/// The entangled single-photon receiver: the post-`B_SI` product density of
/// signal frequency and idler arrival time, prepared once per campaign.
#[derive(Debug, Clone)]
pub struct SinglePhotonLidar {
    pub params: BiphotonParams,
    pub channel: ChannelParams,
    density: MeasurementDensity,
    signal_index: usize,
    idler_index: usize,
}

impl SinglePhotonLidar {
    pub fn new(p: &BiphotonParams, ch: &ChannelParams) -> Result<Self> {
        p.validate()?;
        ch.validate()?;
        let received = apply_channel_and_storage(&build_biphoton(p)?, SIGNAL, IDLER, ch)?;
        let product = apply_bsi(&received, PairSelector::new(SIGNAL, IDLER))?;
        let readout = product.to_rep(SIGNAL, Rep::Frequency)?.to_rep(IDLER, Rep::Time)?;
        Ok(SinglePhotonLidar {
            params: *p,
            channel: *ch,
            density: readout.measurement_density()?,
            signal_index: readout.index_of(SIGNAL)?,
            idler_index: readout.index_of(IDLER)?,
        })
    }

    pub fn density(&self) -> &MeasurementDensity {
        &self.density
    }

    /// Exact `(mean, std)` of `[delta_t, delta_omega]` estimates.
    pub fn estimator_moments(&self) -> ([f64; 2], [f64; 2]) {
        let n = self.density.dim();
        let mut wt = DVector::zeros(n);
        wt[self.idler_index] = 2.0;
        let mut ww = DVector::zeros(n);
        ww[self.signal_index] = 2.0;
        let (mt, st) = self.density.linear_moments(&wt);
        let (mw, sw) = self.density.linear_moments(&ww);
        ([mt + self.channel.delta_t_i, mw - self.params.omega_p], [st, sw])
    }

    /// Measurement draw for one trial, from the measurement stream only.
    pub fn trial(&self, seed: u64, stream: u64, transmissions_used: u64) -> TrialRecord {
        let mut rng = stream_rng(seed, StreamDomain::Measurement, stream);
        let x = self.density.sample(&mut rng);
        let (omega_s, t_i) = (x[self.signal_index], x[self.idler_index]);
        let (dt, dw) = estimate_from_outcomes(omega_s, t_i, self.channel.delta_t_i, self.params.omega_p);
        TrialRecord {
            seed,
            stream,
            truth: self.channel,
            outcomes: [omega_s, t_i],
            estimates: [dt, dw],
            transmissions_used,
        }
    }

    fn bounds(&self) -> Result<BoundSummary> {
        Ok(BoundSummary {
            arthurs_kelly: 1.0,
            product_bound: product_bound(&self.params)?,
            marginal: (
                cr_rhs(&CostMatrix::diag(1.0, 0.0)?, &self.params)?.sqrt(),
                cr_rhs(&CostMatrix::diag(0.0, 1.0)?, &self.params)?.sqrt(),
            ),
        })
    }
}

pub fn run_single_photon_trial(p: &BiphotonParams, ch: &ChannelParams, seed: u64, stream: u64) -> Result<TrialRecord> {
    Ok(SinglePhotonLidar::new(p, ch)?.trial(seed, stream, 1))
}

fn check_trials(n: usize) -> Result<()> {
    if n < MIN_TRIALS {
        return Err(Error::InvalidParams(format!("need at least {MIN_TRIALS} trials, got {n}")));
    }
    Ok(())
}

/// Lossless campaign; trial `i` uses stream `i`.
pub fn run_campaign(p: &BiphotonParams, ch: &ChannelParams, n_trials: usize, seed: u64) -> Result<CampaignResult> {
    check_trials(n_trials)?;
    let lidar = SinglePhotonLidar::new(p, ch)?;
    let records: Vec<TrialRecord> = (0..n_trials as u64)
        .into_par_iter()
        .map(|s| lidar.trial(seed, s, 1))
        .collect();
    Ok(CampaignResult::from_records(seed, ch, lidar.bounds()?, records))
}

/// Photons are sent one at a time until the first return; the returned pair
/// is measured exactly as in the lossless campaign.
pub fn run_lossy_campaign(
    p: &BiphotonParams,
    ch: &ChannelParams,
    n_episodes: usize,
    seed: u64,
) -> Result<CampaignResult> {
    check_trials(n_episodes)?;
    let lidar = SinglePhotonLidar::new(p, ch)?;
    let records = (0..n_episodes as u64)
        .into_par_iter()
        .map(|s| {
            let sent = crate::channel::transmissions_until_k_returns(ch.eta, 1, seed, s)?;
            Ok(lidar.trial(seed, s, sent))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult::from_records(seed, ch, lidar.bounds()?, records))
}

/// How an unentangled transmitter assigns each photon to a time or a
/// frequency measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselinePolicy {
    /// Time-committed photons until one returns, then frequency-committed
    /// photons until one returns.
    AlternatePerDetection,
    /// Commitments alternate with every transmission, starting with time.
    AlternatePerTransmission,
}

/// Unentangled probe photons with `T W = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    /// rms duration `T0`; the rms bandwidth is `1 / (2 T0)`.
    pub t0: f64,
    pub policy: BaselinePolicy,
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(Error::InvalidParams(format!("baseline duration must be positive, got {}", self.t0)));
        }
        Ok(())
    }

    fn probe(&self) -> Result<GaussianAmplitude> {
        let a = DMatrix::from_element(1, 1, C64::new(1.0 / (2.0 * self.t0 * self.t0), 0.0));
        GaussianAmplitude::new(a, DVector::zeros(1), vec![CoordLabel::signal_time(0)])
    }
}

/// Transmissions needed until one time- and one frequency-committed photon
/// have returned.
fn baseline_episode<R: Rng>(eta: f64, policy: BaselinePolicy, rng: &mut R) -> Result<u64> {
    let mut sent = 0u64;
    let mut send = |rng: &mut R| -> Result<bool> {
        if sent == MAX_TRANSMISSIONS {
            return Err(Error::EpisodeOverflow(MAX_TRANSMISSIONS));
        }
        sent += 1;
        Ok(rng.random::<f64>() < eta)
    };
    match policy {
        BaselinePolicy::AlternatePerDetection => {
            while !send(rng)? {}
            while !send(rng)? {}
        }
        BaselinePolicy::AlternatePerTransmission => {
            let (mut got_t, mut got_w) = (false, false);
            let mut k = 0u64;
            while !(got_t && got_w) {
                let back = send(rng)?;
                if k.is_multiple_of(2) {
                    got_t |= back;
                } else {
                    got_w |= back;
                }
                k += 1;
            }
        }
    }
    Ok(sent)
}

/// Unentangled baseline: one time-measured and one frequency-measured return
/// per episode. The carrier is at baseband, so `delta_omega` is read directly.
pub fn run_unentangled_baseline(
    n_episodes: usize,
    eta: f64,
    b: &BaselineParams,
    ch: &ChannelParams,
    seed: u64,
) -> Result<CampaignResult> {
    check_trials(n_episodes)?;
    b.validate()?;
    let ch = ChannelParams { eta, ..*ch };
    ch.validate()?;
    let returned = apply_target_channel(&b.probe()?, 0, &ch)?;
    let time_density = returned.measurement_density()?;
    let freq_density = returned.to_rep(0, Rep::Frequency)?.measurement_density()?;
    let records = (0..n_episodes as u64)
        .into_par_iter()
        .map(|s| {
            let sent = baseline_episode(eta, b.policy, &mut stream_rng(seed, StreamDomain::BaselineLoss, s))?;
            let t = time_density.sample(&mut stream_rng(seed, StreamDomain::BaselineTime, s))[0];
            let w = freq_density.sample(&mut stream_rng(seed, StreamDomain::BaselineFrequency, s))[0];
            Ok(TrialRecord {
                seed,
                stream: s,
                truth: ch,
                outcomes: [t, w],
                estimates: [t, w],
                transmissions_used: sent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let w0 = 1.0 / (2.0 * b.t0);
    let bounds = BoundSummary {
        arthurs_kelly: 1.0,
        product_bound: b.t0 * w0,
        marginal: (b.t0, w0),
    };
    Ok(CampaignResult::from_records(seed, &ch, bounds, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tw_50() -> BiphotonParams {
        BiphotonParams::new(10.0, 0.1)
    }

    fn channel() -> ChannelParams {
        ChannelParams::lossless(3.0, 0.2, 5.0)
    }

    #[test]
    fn narrow_correlation_gives_sharp_delay() {
        let r = run_single_photon_trial(&BiphotonParams::new(1.0, 1e-4), &channel(), 1, 0).unwrap();
        assert!((r.estimates[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn trials_are_reproducible_and_consistent() {
        let p = tw_50().with_carriers(0.4, 2.0);
        let a = run_single_photon_trial(&p, &channel(), 9, 17).unwrap();
        let b = run_single_photon_trial(&p, &channel(), 9, 17).unwrap();
        assert_eq!(a, b);
        let (dt, dw) = estimate_from_outcomes(a.outcomes[0], a.outcomes[1], 5.0, 2.0);
        assert_eq!([dt, dw], a.estimates);
    }

    #[test]
    fn estimator_distribution_is_exact() {
        for p in [tw_50().with_carriers(0.4, 2.0), BiphotonParams::new(0.7, 2.3)] {
            let lidar = SinglePhotonLidar::new(&p, &channel()).unwrap();
            let (mean, std) = lidar.estimator_moments();
            assert_relative_eq!(mean[0], 3.0, epsilon = 1e-10);
            assert_relative_eq!(mean[1], 0.2, epsilon = 1e-10);
            assert_relative_eq!(std[0], p.sigma_cor, max_relative = 1e-12);
            assert_relative_eq!(std[1], 1.0 / (2.0 * p.sigma_coh), max_relative = 1e-12);
            let d = lidar.density();
            assert!(d.covariance[(0, 1)].abs() < 1e-12 * d.covariance[(0, 0)].max(d.covariance[(1, 1)]));
        }
    }

    #[test]
    fn campaign_statistics() {
        let r = run_campaign(&tw_50(), &channel(), 20_000, 5).unwrap();
        assert!(r.delay.unbiased_within(4.0) && r.doppler.unbiased_within(4.0));
        assert!(r.delay.ci_contains(0.1), "{:?}", r.delay);
        assert!(r.doppler.ci_contains(0.05), "{:?}", r.doppler);
        assert!(r.respects_marginal_bounds(4.0));
        assert_eq!(r.budget.mean_transmissions, 1.0);
        assert!(matches!(run_campaign(&tw_50(), &channel(), 10, 5), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn lossless_lossy_campaign_matches_run_campaign() {
        let a = run_campaign(&tw_50(), &channel(), 500, 3).unwrap();
        let b = run_lossy_campaign(&tw_50(), &channel(), 500, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lossy_campaign_budget() {
        let ch = ChannelParams { eta: 0.1, ..channel() };
        let r = run_lossy_campaign(&tw_50(), &ch, 4000, 8).unwrap();
        let sd = (0.9f64).sqrt() / 0.1 / (4000f64).sqrt();
        assert!((r.budget.mean_transmissions - 10.0).abs() < 4.0 * sd);
        let lossless = run_campaign(&tw_50(), &channel(), 4000, 8).unwrap();
        // loss only changes the photon count: records match outcome for outcome
        assert!(r.records.iter().zip(&lossless.records).all(|(x, y)| x.estimates == y.estimates));
    }

    #[test]
    fn baseline_policies() {
        let b = BaselineParams { t0: 1.0, policy: BaselinePolicy::AlternatePerDetection };
        let r = run_unentangled_baseline(200, 1.0, &b, &channel(), 1).unwrap();
        assert!(r.records.iter().all(|x| x.transmissions_used == 2));
        let n = 4000;
        let eta = 0.05;
        let r = run_unentangled_baseline(n, eta, &b, &channel(), 2).unwrap();
        let sd = (2.0 * (1.0 - eta)).sqrt() / eta / (n as f64).sqrt();
        assert!((r.budget.mean_transmissions - 2.0 / eta).abs() < 4.0 * sd);
        assert!(r.delay.ci_contains(1.0) && r.doppler.ci_contains(0.5));
        let alt = BaselineParams { policy: BaselinePolicy::AlternatePerTransmission, ..b };
        let r = run_unentangled_baseline(200, 1.0, &alt, &channel(), 1).unwrap();
        assert!(r.records.iter().all(|x| x.transmissions_used == 2));
        let r = run_unentangled_baseline(n, eta, &alt, &channel(), 2).unwrap();
        assert!(r.budget.mean_transmissions > 2.5 / eta);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_campaign(&tw_50(), &channel(), 3000, 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
