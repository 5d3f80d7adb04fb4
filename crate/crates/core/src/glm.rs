//! Regularised M-photon GLM states and the Heisenberg-limited schemes built
//! on them.
//!
//! A GLM state puts all `M` photons at one common coordinate value. Here the
//! mean coordinate `(x_1 + ... + x_M) / M` has standard deviation `width` and
//! every direction orthogonal to `(1, ..., 1)` has standard deviation
//! `epsilon`, which makes the state normalisable. The collective estimators
//! are linear in the outcomes, so their distributions are exactly Gaussian.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bsi::{apply_bsi, apply_bsi_dagger, apply_product_displacements, PairSelector};
use crate::channel::{apply_channel_and_storage, ChannelParams};
use crate::error::{Error, Result};
use crate::gaussian::{CoordLabel, GaussianAmplitude, MeasurementDensity, PhaseComparison, Rep, Role};
use crate::rng::{stream_rng, StreamDomain};
use crate::stats::{fit_slope, ParameterStats};

pub const MAX_PHOTONS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmParams {
    pub m: usize,
    pub width: f64,
    pub rep: Rep,
    pub epsilon: f64,
    /// Centre of every coordinate in its own representation.
    pub carrier: f64,
}

impl GlmParams {
    pub fn new(m: usize, width: f64, rep: Rep, epsilon: f64) -> Self {
        GlmParams { m, width, rep, epsilon, carrier: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > MAX_PHOTONS {
            return Err(Error::InvalidParams(format!("photon count must be in 1..={MAX_PHOTONS}, got {}", self.m)));
        }
        for (name, v) in [("width", self.width), ("epsilon", self.epsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.carrier.is_finite() {
            return Err(Error::InvalidParams("carrier must be finite".into()));
        }
        Ok(())
    }

    /// Set when the regularisation is too wide to approximate a GLM state.
    pub fn epsilon_warning(&self) -> Option<String> {
        (self.epsilon > self.width / 10.0)
            .then(|| format!("epsilon {} exceeds width/10 = {}", self.epsilon, self.width / 10.0))
    }
}

/// GLM state on photons `0..M`, all labelled as signals.
pub fn build_glm(g: &GlmParams) -> Result<GaussianAmplitude> {
    build_glm_on(g, 0, Role::Signal)
}

/// GLM state on photons `first..first + M`.
pub fn build_glm_on(g: &GlmParams, first: usize, role: Role) -> Result<GaussianAmplitude> {
    g.validate()?;
    let m = g.m;
    let mf = m as f64;
    // covariance M W^2 P + eps^2 (I - P) with P the projector on (1, ..., 1)
    let p = DMatrix::from_element(m, m, 1.0 / mf);
    let q = DMatrix::<f64>::identity(m, m) - &p;
    let precision = &p / (mf * g.width * g.width) + &q / (g.epsilon * g.epsilon);
    let a = (&precision * 0.5).map(|x| C64::new(x, 0.0));
    let b = &a * DVector::from_element(m, C64::new(g.carrier, 0.0));
    let labels = (0..m).map(|k| CoordLabel::new(first + k, role, g.rep)).collect();
    GaussianAmplitude::new(a, b, labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmTrial {
    pub stream: u64,
    /// `[delta_t, delta_omega]`; an entry not estimated by the experiment is NaN.
    pub estimates: [f64; 2],
}

/// Monte Carlo statistics beside the exact estimator distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmParameter {
    pub stats: ParameterStats,
    pub analytic_mean: f64,
    pub analytic_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmResult {
    pub m: usize,
    pub epsilon: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub delay: Option<GlmParameter>,
    pub doppler: Option<GlmParameter>,
    /// Present for the entangled scheme: pipeline versus product form.
    pub product_form_check: Option<PhaseComparison>,
    pub records: Vec<GlmTrial>,
}

/// A linear estimator `w . x + offset` on a measurement density.
struct LinearEstimator {
    weights: DVector<f64>,
    offset: f64,
    truth: f64,
}

impl LinearEstimator {
    fn moments(&self, d: &MeasurementDensity) -> (f64, f64) {
        let (m, s) = d.linear_moments(&self.weights);
        (m + self.offset, s)
    }

    fn apply(&self, x: &DVector<f64>) -> f64 {
        self.weights.dot(x) + self.offset
    }
}

fn weights_on(state: &GaussianAmplitude, photons: impl Iterator<Item = usize>, w: f64) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(state.dim());
    for p in photons {
        v[state.index_of(p)?] = w;
    }
    Ok(v)
}

fn run_linear(
    m: usize,
    epsilon: f64,
    density: &MeasurementDensity,
    delay: Option<LinearEstimator>,
    doppler: Option<LinearEstimator>,
    n_trials: usize,
    seed: u64,
) -> GlmResult {
    let records: Vec<GlmTrial> = (0..n_trials as u64)
        .into_par_iter()
        .map(|s| {
            let x = density.sample(&mut stream_rng(seed, StreamDomain::Glm, s));
            let est = |e: &Option<LinearEstimator>| e.as_ref().map_or(f64::NAN, |e| e.apply(&x));
            GlmTrial { stream: s, estimates: [est(&delay), est(&doppler)] }
        })
        .collect();
    let summarise = |e: &Option<LinearEstimator>, k: usize| {
        e.as_ref().map(|e| {
            let xs: Vec<f64> = records.iter().map(|r| r.estimates[k]).collect();
            let (analytic_mean, analytic_std) = e.moments(density);
            GlmParameter {
                stats: ParameterStats::from_estimates(&xs, e.truth),
                analytic_mean,
                analytic_std,
            }
        })
    };
    GlmResult {
        m,
        epsilon,
        n_trials,
        seed,
        delay: summarise(&delay, 0),
        doppler: summarise(&doppler, 1),
        product_form_check: None,
        records,
    }
}

fn check_trials(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 trials, got {n}")));
    }
    Ok(())
}

/// Frequency-domain GLM: every photon delayed by `delta_t`, every arrival
/// time measured, `delta_t` estimated by the mean arrival time.
pub fn direct_glm_delay_experiment(g: &GlmParams, delta_t: f64, n_trials: usize, seed: u64) -> Result<GlmResult> {
    if g.rep != Rep::Frequency {
        return Err(Error::InvalidParams("direct delay experiment needs a frequency-domain GLM state".into()));
    }
    check_trials(n_trials)?;
    let mut s = build_glm(g)?;
    for k in 0..g.m {
        s = s.time_shift(k, delta_t)?.to_rep(k, Rep::Time)?;
    }
    let est = LinearEstimator {
        weights: weights_on(&s, 0..g.m, 1.0 / g.m as f64)?,
        offset: 0.0,
        truth: delta_t,
    };
    Ok(run_linear(g.m, g.epsilon, &s.measurement_density()?, Some(est), None, n_trials, seed))
}

/// Time-domain GLM: every photon Doppler shifted by `delta_omega`, every
/// frequency measured, `delta_omega` estimated by the mean frequency.
pub fn direct_glm_doppler_experiment(g: &GlmParams, delta_omega: f64, n_trials: usize, seed: u64) -> Result<GlmResult> {
    if g.rep != Rep::Time {
        return Err(Error::InvalidParams("direct Doppler experiment needs a time-domain GLM state".into()));
    }
    check_trials(n_trials)?;
    let mut s = build_glm(g)?;
    for k in 0..g.m {
        s = s.freq_shift(k, delta_omega)?.to_rep(k, Rep::Frequency)?;
    }
    let est = LinearEstimator {
        weights: weights_on(&s, 0..g.m, 1.0 / g.m as f64)?,
        offset: 0.0,
        truth: delta_omega,
    };
    Ok(run_linear(g.m, g.epsilon, &s.measurement_density()?, None, Some(est), n_trials, seed))
}

/// The M-pair scheme: signal GLM in time, idler GLM in frequency.
#[derive(Debug, Clone)]
pub struct EntangledGlm {
    pub signal: GlmParams,
    pub idler: GlmParams,
    input: GaussianAmplitude,
    pairs: Vec<PairSelector>,
}

impl EntangledGlm {
    pub fn new(gs: &GlmParams, gi: &GlmParams) -> Result<Self> {
        if gs.m != gi.m {
            return Err(Error::MismatchedM(gs.m, gi.m));
        }
        if gs.rep != Rep::Time || gi.rep != Rep::Frequency {
            return Err(Error::InvalidParams("signal GLM must be time-domain and idler GLM frequency-domain".into()));
        }
        let m = gs.m;
        let input = build_glm_on(gs, 0, Role::Signal)?.tensor(&build_glm_on(gi, m, Role::Idler)?)?;
        let pairs = (0..m).map(|k| PairSelector::new(k, m + k)).collect();
        Ok(EntangledGlm { signal: *gs, idler: *gi, input, pairs })
    }

    pub fn input(&self) -> &GaussianAmplitude {
        &self.input
    }

    /// `(x) B_SI^dagger`, then the target channel on every signal and
    /// storage on every idler, then `(x) B_SI`.
    pub fn pipeline(&self, ch: &ChannelParams) -> Result<GaussianAmplitude> {
        let mut s = self.input.clone();
        for &p in &self.pairs {
            s = apply_bsi_dagger(&s, p)?;
        }
        for &p in &self.pairs {
            s = apply_channel_and_storage(&s, p.signal, p.idler, ch)?;
        }
        for &p in &self.pairs {
            s = apply_bsi(&s, p)?;
        }
        Ok(s)
    }

    /// The same unitary written as per-photon displacements.
    pub fn product_form(&self, ch: &ChannelParams) -> Result<GaussianAmplitude> {
        let mut s = self.input.clone();
        for &p in &self.pairs {
            s = apply_product_displacements(&s, p, ch)?;
        }
        Ok(s)
    }

    fn readout(&self, ch: &ChannelParams) -> Result<GaussianAmplitude> {
        let mut s = self.pipeline(ch)?;
        for &p in &self.pairs {
            s = s.to_rep(p.signal, Rep::Frequency)?.to_rep(p.idler, Rep::Time)?;
        }
        Ok(s)
    }

    /// `(w_t, w_w)` estimator weights and the zero-shift centres of the
    /// idler-time and signal-frequency sums.
    fn estimators(&self, ch: &ChannelParams) -> Result<(LinearEstimator, LinearEstimator, MeasurementDensity)> {
        let m = self.signal.m;
        let k = 2.0 / m as f64;
        let readout = self.readout(ch)?;
        let wt = weights_on(&readout, self.pairs.iter().map(|p| p.idler), k)?;
        let ww = weights_on(&readout, self.pairs.iter().map(|p| p.signal), k)?;
        let reference = self
            .readout(&ChannelParams::lossless(0.0, 0.0, 0.0))?
            .measurement_density()?;
        let (t0, _) = reference.linear_moments(&wt);
        let (w0, _) = reference.linear_moments(&ww);
        let delay = LinearEstimator { weights: wt, offset: ch.delta_t_i - t0, truth: ch.delta_t_s };
        let doppler = LinearEstimator { weights: ww, offset: -w0, truth: ch.delta_omega_s };
        Ok((delay, doppler, readout.measurement_density()?))
    }

    pub fn analytic_stds(&self, ch: &ChannelParams) -> Result<(f64, f64)> {
        let (d, w, density) = self.estimators(ch)?;
        Ok((d.moments(&density).1, w.moments(&density).1))
    }
}

/// Closed-form estimator standard deviations `(1/(M W), 1/(M T))` of the
/// entangled scheme with signal width `T` and idler width `W`.
pub fn hl_constants(m: usize, t: f64, w: f64) -> (f64, f64) {
    let mf = m as f64;
    (1.0 / (mf * w), 1.0 / (mf * t))
}

pub fn entangled_hl_experiment(
    gs: &GlmParams,
    gi: &GlmParams,
    ch: &ChannelParams,
    n_trials: usize,
    seed: u64,
) -> Result<GlmResult> {
    check_trials(n_trials)?;
    ch.validate()?;
    let scheme = EntangledGlm::new(gs, gi)?;
    let check = scheme.pipeline(ch)?.compare_up_to_phase(&scheme.product_form(ch)?)?;
    let (delay, doppler, density) = scheme.estimators(ch)?;
    let mut out = run_linear(gs.m, gs.epsilon.max(gi.epsilon), &density, Some(delay), Some(doppler), n_trials, seed);
    out.product_form_check = Some(check);
    Ok(out)
}

/// One point of an epsilon sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub rms: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    /// Fitted value at `epsilon = 0`.
    pub value: f64,
    pub se: f64,
    /// Coefficient of `epsilon^2`.
    pub curvature: f64,
    /// Largest absolute fit residual.
    pub residual: f64,
}

/// Fits `rms = a + b epsilon^2`, weighting by the standard errors when all
/// are positive, and returns `a`.
pub fn epsilon_extrapolate(points: &[EpsilonPoint]) -> Result<Extrapolation> {
    if points.len() < 3 {
        return Err(Error::InvalidParams(format!("need at least 3 epsilon values, got {}", points.len())));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    if pts.iter().any(|p| !(p.epsilon > 0.0 && p.rms.is_finite() && p.se >= 0.0)) {
        return Err(Error::InvalidParams("epsilon values must be positive with finite rms".into()));
    }
    let ratio = pts[1].epsilon / pts[0].epsilon;
    if ratio >= 1.0 || pts.windows(2).any(|w| ((w[1].epsilon / w[0].epsilon) / ratio - 1.0).abs() > 1e-6) {
        return Err(Error::InvalidParams("epsilon values must be distinct and geometrically spaced".into()));
    }
    for w in pts.windows(3) {
        let d1 = (w[1].rms - w[0].rms).abs();
        let d2 = (w[2].rms - w[1].rms).abs();
        let noise = 4.0 * (w[1].se.powi(2) + w[2].se.powi(2)).sqrt();
        if d2 > d1 && d2 > noise {
            return Err(Error::NonConvergent(format!(
                "difference grew from {d1:e} to {d2:e} at epsilon {}",
                w[2].epsilon
            )));
        }
    }
    let weighted = pts.iter().all(|p| p.se > 0.0);
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for p in &pts {
        let w = if weighted { 1.0 / (p.se * p.se) } else { 1.0 };
        let x = Vector2::new(1.0, p.epsilon * p.epsilon);
        normal += x * x.transpose() * w;
        rhs += x * (w * p.rms);
    }
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::NonConvergent("degenerate epsilon set".into()))?;
    let coef = inv * rhs;
    let residual = pts
        .iter()
        .map(|p| (p.rms - coef[0] - coef[1] * p.epsilon * p.epsilon).abs())
        .fold(0.0, f64::max);
    Ok(Extrapolation {
        value: coef[0],
        se: if weighted { inv[(0, 0)].sqrt() } else { 0.0 },
        curvature: coef[1],
        residual,
    })
}

/// Slope and standard error of `ln rms` against `ln M`.
pub fn log_log_slope(ms: &[usize], rms: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let y: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
    fit_slope(&x, &y)
}

/// All epsilon runs for one photon count, with their extrapolations.
#[derive(Debug, Clone, PartialEq)]
pub struct HlPoint {
    pub m: usize,
    pub runs: Vec<GlmResult>,
    pub delay: Extrapolation,
    pub doppler: Extrapolation,
    /// `(delta_t, delta_omega)` standard deviations from [`hl_constants`].
    pub closed_form: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HlScan {
    pub points: Vec<HlPoint>,
    pub delay_slope: (f64, f64),
    pub doppler_slope: (f64, f64),
}

fn extrapolate_parameter(runs: &[GlmResult], pick: impl Fn(&GlmResult) -> Option<GlmParameter>) -> Result<Extrapolation> {
    let pts = runs
        .iter()
        .map(|r| {
            let p = pick(r).ok_or_else(|| Error::InvalidParams("missing estimator".into()))?;
            Ok(EpsilonPoint { epsilon: r.epsilon, rms: p.stats.rms, se: p.stats.rms_se })
        })
        .collect::<Result<Vec<_>>>()?;
    epsilon_extrapolate(&pts)
}

/// Entangled scheme over photon counts `ms` and regularisation widths
/// `epsilon_fraction * width`; `gs` and `gi` give the widths.
pub fn hl_scan(
    gs: &GlmParams,
    gi: &GlmParams,
    ms: &[usize],
    epsilon_fractions: &[f64],
    ch: &ChannelParams,
    n_trials: usize,
    seed: u64,
) -> Result<HlScan> {
    let mut points = Vec::with_capacity(ms.len());
    for &m in ms {
        let runs = epsilon_fractions
            .iter()
            .map(|&f| {
                let s = GlmParams { m, epsilon: f * gs.width, ..*gs };
                let i = GlmParams { m, epsilon: f * gi.width, ..*gi };
                entangled_hl_experiment(&s, &i, ch, n_trials, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        // extrapolate in the common fraction so both parameters share a grid
        let scaled = |r: &GlmResult, f: f64| GlmResult { epsilon: f, ..r.clone() };
        let by_fraction: Vec<GlmResult> = runs.iter().zip(epsilon_fractions).map(|(r, &f)| scaled(r, f)).collect();
        let delay = extrapolate_parameter(&by_fraction, |r| r.delay)?;
        let doppler = extrapolate_parameter(&by_fraction, |r| r.doppler)?;
        points.push(HlPoint {
            m,
            runs,
            delay,
            doppler,
            closed_form: hl_constants(m, gs.width, gi.width),
        });
    }
    let t: Vec<f64> = points.iter().map(|p| p.delay.value).collect();
    let w: Vec<f64> = points.iter().map(|p| p.doppler.value).collect();
    Ok(HlScan {
        delay_slope: log_log_slope(ms, &t),
        doppler_slope: log_log_slope(ms, &w),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn single_photon_glm_ignores_epsilon() {
        let a = build_glm(&GlmParams::new(1, 2.0, Rep::Frequency, 0.01)).unwrap();
        let b = build_glm(&GlmParams::new(1, 2.0, Rep::Frequency, 5.0)).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.measurement_density().unwrap().std(0), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn glm_is_normalised_and_correlated() {
        let g = GlmParams::new(3, 5.0, Rep::Frequency, 0.05);
        let s = build_glm(&g).unwrap();
        assert!(s.log_norm_sq().unwrap().abs() < 1e-12);
        let d = s.measurement_density().unwrap();
        let corr = d.covariance[(0, 1)] / (d.std(0) * d.std(1));
        assert!(corr > 0.999, "{corr}");
        let mean = DVector::from_element(3, 1.0 / 3.0);
        assert_relative_eq!(d.linear_moments(&mean).1, 5.0, max_relative = 1e-10);
        assert!(g.epsilon_warning().is_none());
        assert!(GlmParams::new(3, 5.0, Rep::Frequency, 1.0).epsilon_warning().is_some());
    }

    #[test]
    fn collective_frequency_of_time_glm() {
        for eps in [0.1, 0.02, 0.004] {
            let mut s = build_glm(&GlmParams::new(4, 2.0, Rep::Time, eps)).unwrap();
            for k in 0..4 {
                s = s.fourier(k).unwrap();
            }
            let (_, sd) = s.measurement_density().unwrap().linear_moments(&DVector::from_element(4, 1.0));
            assert_relative_eq!(sd, 1.0 / (2.0 * 2.0), max_relative = 1e-10);
        }
    }

    #[test]
    fn invalid_glm_params() {
        assert!(build_glm(&GlmParams::new(0, 1.0, Rep::Time, 0.01)).is_err());
        assert!(build_glm(&GlmParams::new(33, 1.0, Rep::Time, 0.01)).is_err());
        assert!(build_glm(&GlmParams::new(2, -1.0, Rep::Time, 0.01)).is_err());
        let gs = GlmParams::new(2, 1.0, Rep::Time, 0.01);
        let gi = GlmParams::new(3, 1.0, Rep::Frequency, 0.01);
        let ch = ChannelParams::lossless(0.0, 0.0, 0.0);
        assert_eq!(entangled_hl_experiment(&gs, &gi, &ch, 10, 1).unwrap_err(), Error::MismatchedM(2, 3));
    }

    #[test]
    fn direct_delay_exact_distribution() {
        for (m, w) in [(1usize, 5.0), (4, 5.0), (7, 1.3)] {
            let g = GlmParams::new(m, w, Rep::Frequency, w / 100.0);
            let r = direct_glm_delay_experiment(&g, 0.7, 2000, 3).unwrap();
            let d = r.delay.unwrap();
            assert_relative_eq!(d.analytic_std, 1.0 / (2.0 * m as f64 * w), max_relative = 1e-9);
            assert_relative_eq!(d.analytic_mean, 0.7, epsilon = 1e-12);
            assert!(d.stats.unbiased_within(4.0));
            assert!(d.stats.ci_contains(d.analytic_std));
        }
    }

    #[test]
    fn direct_doppler_exact_distribution() {
        let g = GlmParams::new(4, 2.0, Rep::Time, 0.02);
        let r = direct_glm_doppler_experiment(&g, -0.3, 2000, 3).unwrap();
        let d = r.doppler.unwrap();
        assert_relative_eq!(d.analytic_std, 1.0 / (2.0 * 4.0 * 2.0), max_relative = 1e-9);
        assert_relative_eq!(d.analytic_mean, -0.3, epsilon = 1e-12);
    }

    #[test]
    fn entangled_scheme_constants_and_means() {
        let ch = ChannelParams::lossless(0.0, 0.0, 1.5);
        for m in [1usize, 2, 5] {
            let gs = GlmParams::new(m, 3.0, Rep::Time, 0.03);
            let gi = GlmParams::new(m, 2.0, Rep::Frequency, 0.02);
            let r = entangled_hl_experiment(&gs, &gi, &ch, 1000, 4).unwrap();
            let (d, w) = (r.delay.unwrap(), r.doppler.unwrap());
            assert!(d.analytic_mean.abs() < 1e-10 && w.analytic_mean.abs() < 1e-10);
            let (ct, cw) = hl_constants(m, 3.0, 2.0);
            assert_relative_eq!(d.analytic_std, ct, max_relative = 1e-8);
            assert_relative_eq!(w.analytic_std, cw, max_relative = 1e-8);
            assert!(r.product_form_check.unwrap().max_diff() < 1e-9);
        }
    }

    #[test]
    fn entangled_scheme_carrier_offsets() {
        let ch = ChannelParams::lossless(2.0, 0.4, 1.0);
        let gs = GlmParams { carrier: 0.5, ..GlmParams::new(3, 3.0, Rep::Time, 0.03) };
        let gi = GlmParams { carrier: 1.5, ..GlmParams::new(3, 2.0, Rep::Frequency, 0.02) };
        let r = entangled_hl_experiment(&gs, &gi, &ch, 500, 4).unwrap();
        assert_relative_eq!(r.delay.unwrap().analytic_mean, 2.0, epsilon = 1e-9);
        assert_relative_eq!(r.doppler.unwrap().analytic_mean, 0.4, epsilon = 1e-9);
    }

    #[test]
    fn extrapolation_exact_cases() {
        let pts: Vec<EpsilonPoint> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&e| EpsilonPoint { epsilon: e, rms: 0.3, se: 0.0 })
            .collect();
        assert!((epsilon_extrapolate(&pts).unwrap().value - 0.3).abs() < 1e-14);
        let pts: Vec<EpsilonPoint> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&e| EpsilonPoint { epsilon: e, rms: 0.25 + 3.0 * e * e, se: 0.0 })
            .collect();
        let x = epsilon_extrapolate(&pts).unwrap();
        assert!((x.value - 0.25).abs() < 1e-6);
        assert!((x.curvature - 3.0).abs() < 1e-6);
        assert!(epsilon_extrapolate(&pts[..2]).is_err());
        let bad: Vec<EpsilonPoint> = [0.4, 0.3, 0.1]
            .iter()
            .map(|&e| EpsilonPoint { epsilon: e, rms: 1.0, se: 0.0 })
            .collect();
        assert!(matches!(epsilon_extrapolate(&bad), Err(Error::InvalidParams(_))));
        let diverging = [(0.4, 1.0), (0.2, 1.1), (0.1, 2.0)]
            .map(|(e, r)| EpsilonPoint { epsilon: e, rms: r, se: 0.001 });
        assert!(matches!(epsilon_extrapolate(&diverging), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn slope_of_heisenberg_sequence() {
        let ms = [1usize, 2, 4, 8];
        let r: Vec<f64> = ms.iter().map(|&m| 0.2 / m as f64).collect();
        let (s, _) = log_log_slope(&ms, &r);
        assert_relative_eq!(s, -1.0, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn glm_exchange_symmetric(m in 2usize..6, w in 0.1f64..10.0, f in 0.001f64..0.1, shift in 0usize..5) {
            let s = build_glm(&GlmParams::new(m, w, Rep::Frequency, f * w)).unwrap();
            let perm: Vec<usize> = (0..m).map(|i| (i + shift + 1) % m).collect();
            let (a, b) = (s.a(), s.b());
            let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for i in 0..m {
                prop_assert!((b[perm[i]] - b[i]).norm() <= 1e-12 * scale.max(1.0));
                for j in 0..m {
                    prop_assert!((a[(perm[i], perm[j])] - a[(i, j)]).norm() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn product_form_matches_pipeline(
            m in 1usize..4,
            t in 0.5f64..4.0, w in 0.5f64..4.0,
            dt in -3.0f64..3.0, dw in -1.0f64..1.0, dti in -3.0f64..3.0,
        ) {
            let gs = GlmParams::new(m, t, Rep::Time, t / 50.0);
            let gi = GlmParams::new(m, w, Rep::Frequency, w / 50.0);
            let scheme = EntangledGlm::new(&gs, &gi).unwrap();
            let ch = ChannelParams::lossless(dt, dw, dti);
            let cmp = scheme.pipeline(&ch).unwrap().compare_up_to_phase(&scheme.product_form(&ch).unwrap()).unwrap();
            prop_assert!(cmp.max_diff() < 1e-9, "{:?}", cmp);
        }
    }
}
