//! Deterministic reductions and the confidence intervals used by campaigns.
//!
//! Intervals are two-sided at 99.99% (the 4-sigma convention). rms values are
//! taken about the known truth, so `n rms^2 / sigma^2 ~ chi^2_n`.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.9999;

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() as f64 - 1.0)
}

fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let prod: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    pairwise_sum(&prod) / (xs.len() as f64 - 1.0)
}

/// Two-sided standard-normal quantile for [`CONFIDENCE`].
pub fn z_quantile() -> f64 {
    Normal::standard().inverse_cdf(0.5 + CONFIDENCE / 2.0)
}

/// Error statistics of one estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterStats {
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub bias_se: f64,
    /// Root-mean-square error about the truth.
    pub rms: f64,
    /// Delta-method standard error of `rms`.
    pub rms_se: f64,
    /// Chi-square interval for the underlying rms error.
    pub rms_ci: (f64, f64),
}

impl ParameterStats {
    pub fn from_estimates(estimates: &[f64], truth: f64) -> Self {
        let n = estimates.len();
        let nf = n as f64;
        let err: Vec<f64> = estimates.iter().map(|e| e - truth).collect();
        let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
        let ms = mean(&sq);
        let rms = ms.sqrt();
        let rms_se = if rms > 0.0 {
            (variance(&sq) / nf).sqrt() / (2.0 * rms)
        } else {
            0.0
        };
        let alpha = 1.0 - CONFIDENCE;
        let chi = ChiSquared::new(nf).expect("positive degrees of freedom");
        let lo = (nf * ms / chi.inverse_cdf(1.0 - alpha / 2.0)).sqrt();
        let hi = (nf * ms / chi.inverse_cdf(alpha / 2.0)).sqrt();
        let m = mean(estimates);
        ParameterStats {
            truth,
            mean: m,
            bias: m - truth,
            bias_se: (variance(estimates) / nf).sqrt(),
            rms,
            rms_se,
            rms_ci: (lo, hi),
        }
    }

    /// `|bias| <= k` standard errors.
    pub fn unbiased_within(&self, k: f64) -> bool {
        self.bias.abs() <= k * self.bias_se
    }

    /// Whether `value` lies inside the chi-square interval.
    pub fn ci_contains(&self, value: f64) -> bool {
        self.rms_ci.0 <= value && value <= self.rms_ci.1
    }
}

/// The rms product `rms_t * rms_w` and its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductStats {
    pub value: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

impl ProductStats {
    /// Delta method on `ln P = (ln m_t + ln m_w) / 2` where `m` are the mean
    /// squared errors, including their correlation.
    pub fn from_errors(t_err: &[f64], w_err: &[f64]) -> Self {
        let nf = t_err.len() as f64;
        let st: Vec<f64> = t_err.iter().map(|e| e * e).collect();
        let sw: Vec<f64> = w_err.iter().map(|e| e * e).collect();
        let (mt, mw) = (mean(&st), mean(&sw));
        let value = (mt * mw).sqrt();
        let var_ln = 0.25
            * (variance(&st) / (mt * mt) + variance(&sw) / (mw * mw) + 2.0 * covariance(&st, &sw) / (mt * mw))
            / nf;
        let sd_ln = var_ln.max(0.0).sqrt();
        let z = z_quantile();
        ProductStats {
            value,
            se: value * sd_ln,
            ci: (value * (-z * sd_ln).exp(), value * (z * sd_ln).exp()),
        }
    }
}

/// Photon-budget statistics of a lossy campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetStats {
    pub mean_transmissions: f64,
    pub se: f64,
    pub max_transmissions: u64,
}

impl BudgetStats {
    pub fn from_counts(counts: &[u64]) -> Self {
        let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        BudgetStats {
            mean_transmissions: mean(&xs),
            se: if xs.len() > 1 { (variance(&xs) / xs.len() as f64).sqrt() } else { 0.0 },
            max_transmissions: counts.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Ordinary least-squares slope and its standard error.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss = pairwise_sum(&xs.iter().zip(ys).map(|(x, y)| (y - icept - slope * x).powi(2)).collect::<Vec<_>>());
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}
