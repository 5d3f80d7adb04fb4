//! Experiment dispatch and artifact generation.
//!
//! Every artifact is a pure function of the canonical configuration text,
//! so reruns are byte-identical whatever the worker count.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use qlidar::biphoton::{
    entanglement_entropy_paper, schmidt_spectrum_oracle, time_bandwidth, BiphotonParams, SchmidtGrid,
};
use qlidar::channel::{estimates_to_truth, truth_to_channel, ChannelParams, TargetTruth};
use qlidar::estimation::{
    commutator_numeric, commutator_term, cr_report, product_bound_numeric, qfi_numeric, CostMatrix,
    FiniteDiffStep,
};
use qlidar::glm::{direct_glm_delay_experiment, epsilon_extrapolate, hl_scan, EpsilonPoint, GlmParams};
use qlidar::gaussian::Rep;
use qlidar::montecarlo::{
    run_campaign, run_lossy_campaign, run_single_photon_trial, run_unentangled_baseline, BaselineParams,
    BaselinePolicy, CampaignResult, SinglePhotonLidar, TrialRecord,
};
use qlidar::sdc::{sdc_operator_identity, sdc_run};
use qlidar::stats::ParameterStats;

use crate::config::{serialize, Experiment, ScenarioConfig};

/// Largest oracle grid the `crlb` scenario diagonalises.
const ORACLE_POINT_LIMIT: usize = 700;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: qlidar::Error,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

trait Context<T> {
    fn ctx(self, context: &str) -> Result<T, RunError>;
}

impl<T> Context<T> for qlidar::Result<T> {
    fn ctx(self, context: &str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Numerical { context: context.into(), source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Files produced by a run, in writing order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl ScenarioOutput {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), RunError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| RunError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(io(&path))?;
        }
        Ok(())
    }
}

/// Shortest round-trip float text.
fn num(x: f64) -> String {
    format!("{x:?}")
}

struct Summary {
    text: String,
    checks: Vec<Check>,
}

impl Summary {
    fn new(c: &ScenarioConfig) -> Self {
        let canonical = serialize(c);
        let hash = Sha256::digest(canonical.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        let mut text = String::new();
        let _ = writeln!(text, "experiment = {}", c.experiment);
        let _ = writeln!(text, "config_sha256 = {hex}");
        let _ = writeln!(text, "seed = {}", c.seed.map_or("none".into(), |s| s.to_string()));
        Summary { text, checks: Vec::new() }
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn f(&mut self, key: &str, value: f64) {
        self.kv(key, num(value));
    }

    fn stats(&mut self, prefix: &str, s: &ParameterStats) {
        self.f(&format!("{prefix}.truth"), s.truth);
        self.f(&format!("{prefix}.bias"), s.bias);
        self.f(&format!("{prefix}.bias_se"), s.bias_se);
        self.f(&format!("{prefix}.rms"), s.rms);
        self.f(&format!("{prefix}.rms_se"), s.rms_se);
        self.kv(&format!("{prefix}.rms_ci_99.99"), format!("{} {}", num(s.rms_ci.0), num(s.rms_ci.1)));
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    fn finish(mut self) -> (String, Vec<Check>) {
        for c in &self.checks {
            let _ = writeln!(self.text, "check.{} = {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        }
        let pass = self.checks.iter().all(|c| c.pass);
        let _ = writeln!(
            self.text,
            "checks_passed = {}/{}",
            self.checks.iter().filter(|c| c.pass).count(),
            self.checks.len()
        );
        let _ = writeln!(self.text, "result = {}", if pass { "PASS" } else { "FAIL" });
        (self.text, self.checks)
    }
}

/// Newline-delimited table: one header line, then numeric rows.
struct Table {
    text: String,
}

impl Table {
    fn new(columns: &str) -> Self {
        Table { text: format!("# {columns}\n") }
    }

    fn row(&mut self, cols: &[String]) {
        self.text.push_str(&cols.join(" "));
        self.text.push('\n');
    }
}

fn biphoton(c: &ScenarioConfig) -> BiphotonParams {
    let b = c.biphoton.as_ref().expect("validated config has [biphoton]");
    BiphotonParams::new(b.sigma_coh, b.sigma_cor).with_carriers(b.delta_omega, b.omega_p)
}

fn channel(c: &ScenarioConfig) -> Result<ChannelParams, RunError> {
    let Some(ch) = &c.channel else {
        return Ok(ChannelParams::lossless(0.0, 0.0, 0.0));
    };
    match &c.target {
        Some(t) => truth_to_channel(&target(t), ch.delta_t_i, ch.eta).ctx("target conversion"),
        None => Ok(ChannelParams {
            delta_t_s: ch.delta_t_s.unwrap_or(0.0),
            delta_omega_s: ch.delta_omega_s.unwrap_or(0.0),
            delta_t_i: ch.delta_t_i,
            eta: ch.eta,
        }),
    }
}

fn target(t: &crate::config::TargetSection) -> TargetTruth {
    TargetTruth {
        range: t.range,
        radial_velocity: t.radial_velocity,
        carrier: t.carrier,
        light_speed: t.light_speed,
    }
}

fn within(value: f64, expected: f64, rel: f64) -> (bool, String) {
    let dev = value / expected - 1.0;
    (dev.abs() <= rel, format!("{} vs {}, deviation {:+.3}%", num(value), num(expected), 100.0 * dev))
}

fn campaign_records(records: &[TrialRecord]) -> String {
    let mut t = Table::new(
        "stream outcome_1 outcome_2 delta_t_estimate[u] delta_omega_estimate[rad/u] transmissions \
         (outcome_1, outcome_2 = signal frequency [rad/u], idler time [u]; baseline: time [u], frequency [rad/u])",
    );
    for r in records {
        t.row(&[
            r.stream.to_string(),
            num(r.outcomes[0]),
            num(r.outcomes[1]),
            num(r.estimates[0]),
            num(r.estimates[1]),
            r.transmissions_used.to_string(),
        ]);
    }
    t.text
}

/// Normalised histogram of `xs` over `bins` equal bins spanning `[lo, hi]`.
fn histogram(columns: &str, xs: &[f64], lo: f64, hi: f64, bins: usize) -> String {
    let mut counts = vec![0usize; bins];
    let w = (hi - lo) / bins as f64;
    for &x in xs {
        let k = ((x - lo) / w).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let mut t = Table::new(columns);
    for (k, n) in counts.iter().enumerate() {
        t.row(&[num(lo + (k as f64 + 0.5) * w), num(*n as f64 / (xs.len() as f64 * w))]);
    }
    t.text
}

fn error_histogram(r: &CampaignResult) -> String {
    let errs: Vec<f64> = r
        .records
        .iter()
        .map(|x| (x.estimates[0] - r.delay.truth) / r.delay.rms)
        .collect();
    histogram("delay_error_over_rms probability_density", &errs, -5.0, 5.0, 50)
}

fn transmission_histogram(r: &CampaignResult) -> String {
    let xs: Vec<f64> = r.records.iter().map(|x| x.transmissions_used as f64).collect();
    let hi = (r.budget.max_transmissions as f64).max(1.0) + 1.0;
    histogram("transmissions probability_density", &xs, 0.0, hi, 50)
}

fn campaign_summary(s: &mut Summary, prefix: &str, r: &CampaignResult) {
    s.kv(&format!("{prefix}.n"), r.n_trials);
    s.stats(&format!("{prefix}.delay"), &r.delay);
    s.stats(&format!("{prefix}.doppler"), &r.doppler);
    s.f(&format!("{prefix}.product"), r.product.value);
    s.f(&format!("{prefix}.product_se"), r.product.se);
    s.kv(&format!("{prefix}.product_ci_99.99"), format!("{} {}", num(r.product.ci.0), num(r.product.ci.1)));
    s.f(&format!("{prefix}.bound.arthurs_kelly"), r.bounds.arthurs_kelly);
    s.f(&format!("{prefix}.bound.product"), r.bounds.product_bound);
    s.f(&format!("{prefix}.bound.delay"), r.bounds.marginal.0);
    s.f(&format!("{prefix}.bound.doppler"), r.bounds.marginal.1);
    s.f(&format!("{prefix}.transmissions.mean"), r.budget.mean_transmissions);
    s.f(&format!("{prefix}.transmissions.se"), r.budget.se);
    s.kv(&format!("{prefix}.transmissions.max"), r.budget.max_transmissions);
}

/// Indistinguishability of two rms values at `k` combined standard errors.
fn rms_agree(a: &ParameterStats, b: &ParameterStats, k: f64) -> (bool, String) {
    let se = (a.rms_se.powi(2) + b.rms_se.powi(2)).sqrt();
    let z = (a.rms - b.rms) / se;
    (z.abs() <= k, format!("{} vs {}, z = {:+.2}", num(a.rms), num(b.rms), z))
}

struct Run {
    summary: Summary,
    records: String,
    plots: Vec<(String, String)>,
}

pub fn run_scenario(c: &ScenarioConfig) -> Result<ScenarioOutput, RunError> {
    let mut run = Run { summary: Summary::new(c), records: String::new(), plots: Vec::new() };
    match c.experiment {
        Experiment::Crlb => crlb(c, &mut run)?,
        Experiment::SingleShot => single_shot(c, &mut run)?,
        Experiment::MonteCarlo => monte_carlo(c, &mut run)?,
        Experiment::Lossy => lossy(c, &mut run)?,
        Experiment::Baseline => baseline(c, &mut run)?,
        Experiment::Budget => budget(c, &mut run)?,
        Experiment::HlScan => hl(c, &mut run)?,
        Experiment::GlmDirect => glm_direct(c, &mut run)?,
        Experiment::SdcDemo => sdc(&mut run),
    }
    let (summary, checks) = run.summary.finish();
    let mut files = vec![(c.output.records.clone(), run.records), (c.output.summary.clone(), summary)];
    for (suffix, body) in run.plots {
        files.push((format!("{}_{suffix}.dat", c.output.plot_prefix), body));
    }
    Ok(ScenarioOutput { files, checks })
}

fn crlb(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let p = biphoton(c);
    let ch = channel(c)?;
    let s = &mut run.summary;
    let tw = time_bandwidth(&p).ctx("time-bandwidth")?;
    let report = cr_report(&CostMatrix::diag(1.0, 1.0).ctx("cost")?, &p).ctx("bounds")?;
    let numeric = qfi_numeric(&p, &ch, &FiniteDiffStep::default_for(&p)).ctx("numeric QFI")?;
    let comm = commutator_numeric(&p, &ch, &FiniteDiffStep::default_for(&p)).ctx("numeric commutator")?;
    let scan = product_bound_numeric(&p).ctx("z-scan")?;
    s.f("tw", tw);
    s.kv("qfi", format!("{} {} {} {}", num(report.j[(0, 0)]), num(report.j[(0, 1)]), num(report.j[(1, 0)]), num(report.j[(1, 1)])));
    s.kv("qfi_numeric", format!("{} {} {} {}", num(numeric[(0, 0)]), num(numeric[(0, 1)]), num(numeric[(1, 0)]), num(numeric[(1, 1)])));
    s.f("commutator", commutator_term(&p).ctx("commutator")?);
    s.f("commutator_numeric", comm);
    s.f("bound.delay", report.marginal_bounds.0);
    s.f("bound.doppler", report.marginal_bounds.1);
    s.f("bound.product", report.product_bound);
    s.f("bound.product_zscan", scan.bound);
    s.f("bound.product_zscan.z_star", scan.z_star);
    s.f("bound.product_times_4tw", report.product_bound * 4.0 * tw);
    s.f("bound.arthurs_kelly", 1.0);
    if (report.product_bound - 1.0).abs() < 1e-12 {
        s.kv("annotation", "product bound equals 1: the Arthurs-Kelly inequality is recovered for TW = 1/2");
    } else {
        s.kv(
            "annotation",
            format!("product bound is {} of the Arthurs-Kelly value 1", num(report.product_bound)),
        );
    }
    let e = entanglement_entropy_paper(&p).ctx("entropy")?;
    s.f("entropy.log2_2tw_bits", e.log2_2tw_bits);
    s.f("entropy.gaussian_bits", e.gaussian_bits);
    s.f("entropy.mu_a", e.mu_a);
    let grid = SchmidtGrid::resolving(&p);
    if grid.points <= ORACLE_POINT_LIMIT {
        let o = schmidt_spectrum_oracle(&p, &grid).ctx("Schmidt oracle")?;
        s.f("entropy.oracle_bits", o.entropy_bits);
        s.f("entropy.oracle_minus_log2_2tw", o.entropy_bits - e.log2_2tw_bits);
        s.f("schmidt.trace", o.trace);
        s.f("schmidt.participation_ratio", o.participation_ratio);
        s.f("schmidt.geometric_z", o.fit.z);
    } else {
        s.kv("entropy.oracle_bits", format!("skipped ({} grid points needed)", grid.points));
    }

    let exact = report.j;
    let rel = (numeric - exact).abs().max() / exact.abs().max();
    s.check("qfi_numeric_matches", rel <= 1e-4, format!("max relative deviation {rel:e}"));
    s.check("commutator_is_4", (comm - 4.0).abs() <= 4e-4, num(comm));
    let zrel = (scan.bound / report.product_bound - 1.0).abs();
    s.check("zscan_matches_closed_form", zrel <= 1e-6, format!("relative deviation {zrel:e}"));
    let ratio = report.product_bound * 4.0 * tw;
    s.check(
        "product_bound_window",
        ratio > 1.0 && ratio <= 1.0 + 1.0 / (2.0 * tw) + 1e-12,
        format!("4TW x bound = {}", num(ratio)),
    );

    // bound versus TW at fixed sigma_coh
    let mut rec = Table::new("sigma_cor[u] tw product_bound one_over_4tw");
    let mut plot = Table::new("tw product_bound");
    for k in 0..=40 {
        let q = BiphotonParams::new(p.sigma_coh, 2.0 * p.sigma_coh * 10f64.powf(-3.0 * k as f64 / 40.0));
        let tw = time_bandwidth(&q).ctx("sweep")?;
        let b = qlidar::estimation::product_bound(&q).ctx("sweep")?;
        rec.row(&[num(q.sigma_cor), num(tw), num(b), num(0.25 / tw)]);
        plot.row(&[num(tw), num(b)]);
    }
    run.records = rec.text;
    run.plots.push(("bound".into(), plot.text));
    Ok(())
}

fn single_shot(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let p = biphoton(c);
    let ch = channel(c)?;
    let seed = c.seed.expect("validated");
    let r = run_single_photon_trial(&p, &ch, seed, 0).ctx("single-shot trial")?;
    let s = &mut run.summary;
    s.f("truth.delta_t_s", ch.delta_t_s);
    s.f("truth.delta_omega_s", ch.delta_omega_s);
    s.f("outcome.signal_frequency", r.outcomes[0]);
    s.f("outcome.idler_time", r.outcomes[1]);
    s.f("estimate.delta_t", r.estimates[0]);
    s.f("estimate.delta_omega", r.estimates[1]);
    if let Some(t) = &c.target {
        let (range, v) = estimates_to_truth(r.estimates[0], r.estimates[1], t.carrier, t.light_speed)
            .ctx("estimate conversion")?;
        s.f("truth.range", t.range);
        s.f("truth.radial_velocity", t.radial_velocity);
        s.f("estimate.range", range);
        s.f("estimate.radial_velocity", v);
    }
    let (mean, std) = SinglePhotonLidar::new(&p, &ch).ctx("receiver")?.estimator_moments();
    s.f("estimator.delta_t.mean", mean[0]);
    s.f("estimator.delta_t.std", std[0]);
    s.f("estimator.delta_omega.mean", mean[1]);
    s.f("estimator.delta_omega.std", std[1]);
    run.records = campaign_records(&[r]);
    let mut plot = Table::new("delta_t_estimate delta_omega_estimate");
    plot.row(&[num(r.estimates[0]), num(r.estimates[1])]);
    run.plots.push(("estimate".into(), plot.text));
    Ok(())
}

/// Checks shared by the entangled campaigns against the exact estimator law.
fn entangled_checks(s: &mut Summary, r: &CampaignResult, lidar: &SinglePhotonLidar) {
    let (_, std) = lidar.estimator_moments();
    s.f("exact.delay_std", std[0]);
    s.f("exact.doppler_std", std[1]);
    s.check(
        "delay_unbiased",
        r.delay.unbiased_within(4.0),
        format!("bias {} with se {}", num(r.delay.bias), num(r.delay.bias_se)),
    );
    s.check(
        "doppler_unbiased",
        r.doppler.unbiased_within(4.0),
        format!("bias {} with se {}", num(r.doppler.bias), num(r.doppler.bias_se)),
    );
    let (ok, d) = within(r.delay.rms, std[0], 0.02);
    s.check("delay_rms_2pct", ok, d);
    let (ok, d) = within(r.doppler.rms, std[1], 0.02);
    s.check("doppler_rms_2pct", ok, d);
    s.check(
        "marginal_bounds_respected",
        r.respects_marginal_bounds(4.0),
        format!(
            "{} vs {}, {} vs {}, one-sided at 4 se",
            num(r.delay.rms),
            num(r.bounds.marginal.0),
            num(r.doppler.rms),
            num(r.bounds.marginal.1)
        ),
    );
}

fn monte_carlo(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let p = biphoton(c);
    let ch = channel(c)?;
    let r = run_campaign(&p, &ch, c.trials.expect("validated"), c.seed.expect("validated")).ctx("campaign")?;
    let lidar = SinglePhotonLidar::new(&p, &ch).ctx("receiver")?;
    let tw = time_bandwidth(&p).ctx("time-bandwidth")?;
    let s = &mut run.summary;
    campaign_summary(s, "campaign", &r);
    s.f("tw", tw);
    s.f("product_times_4tw", r.product.value * 4.0 * tw);
    entangled_checks(s, &r, &lidar);
    s.check(
        "beats_arthurs_kelly",
        r.product.value + 4.0 * r.product.se < r.bounds.arthurs_kelly,
        format!("{} vs 1", num(r.product.value)),
    );
    let margin = (r.product.value - r.bounds.product_bound) / r.product.se;
    s.check(
        "product_above_joint_bound_3se",
        margin >= -3.0,
        format!("{} vs {}, {:+.2} se", num(r.product.value), num(r.bounds.product_bound), margin),
    );
    run.records = campaign_records(&r.records);
    run.plots.push(("delay_errors".into(), error_histogram(&r)));
    Ok(())
}

fn budget_check(s: &mut Summary, name: &str, r: &CampaignResult, expected: f64, sd_one: f64) {
    let sd = sd_one / (r.n_trials as f64).sqrt();
    let z = (r.budget.mean_transmissions - expected) / sd;
    s.check(
        name,
        z.abs() <= 4.0,
        format!("mean {} vs {}, z = {:+.2}", num(r.budget.mean_transmissions), num(expected), z),
    );
}

fn lossy(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let p = biphoton(c);
    let ch = channel(c)?;
    let n = c.trials.expect("validated");
    let r = run_lossy_campaign(&p, &ch, n, c.seed.expect("validated")).ctx("lossy campaign")?;
    let lidar = SinglePhotonLidar::new(&p, &ch).ctx("receiver")?;
    let s = &mut run.summary;
    campaign_summary(s, "lossy", &r);
    entangled_checks(s, &r, &lidar);
    let eta = ch.eta;
    budget_check(s, "transmissions_one_over_eta", &r, 1.0 / eta, (1.0 - eta).sqrt() / eta);
    if let Some(seed) = c.reference_seed {
        let lossless = ChannelParams { eta: 1.0, ..ch };
        let reference = run_campaign(&p, &lossless, n, seed).ctx("reference campaign")?;
        campaign_summary(s, "reference", &reference);
        let (ok, d) = rms_agree(&r.delay, &reference.delay, 3.0);
        s.check("delay_rms_matches_lossless", ok, d);
        let (ok, d) = rms_agree(&r.doppler, &reference.doppler, 3.0);
        s.check("doppler_rms_matches_lossless", ok, d);
    }
    run.records = campaign_records(&r.records);
    run.plots.push(("transmissions".into(), transmission_histogram(&r)));
    Ok(())
}

fn baseline_params(c: &ScenarioConfig) -> BaselineParams {
    let b = c.baseline.as_ref().expect("validated config has [baseline]");
    BaselineParams { t0: b.t0, policy: b.policy }
}

fn baseline_checks(s: &mut Summary, r: &CampaignResult, b: &BaselineParams, eta: f64) {
    if b.policy == BaselinePolicy::AlternatePerDetection {
        // sum of two independent geometric waits
        budget_check(s, "transmissions_two_over_eta", r, 2.0 / eta, (2.0 * (1.0 - eta)).sqrt() / eta);
    }
    let (dt, dw) = r.bounds.marginal;
    s.check("delay_rms_ci_contains_t0", r.delay.ci_contains(dt), format!("{} vs {}", num(r.delay.rms), num(dt)));
    s.check("doppler_rms_ci_contains_w0", r.doppler.ci_contains(dw), format!("{} vs {}", num(r.doppler.rms), num(dw)));
}

fn baseline(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let ch = channel(c)?;
    let b = baseline_params(c);
    let r = run_unentangled_baseline(c.trials.expect("validated"), ch.eta, &b, &ch, c.seed.expect("validated"))
        .ctx("baseline")?;
    let s = &mut run.summary;
    campaign_summary(s, "baseline", &r);
    s.f("entangled.expected_transmissions", 1.0 / ch.eta);
    s.f("budget_ratio_entangled_to_baseline", (1.0 / ch.eta) / r.budget.mean_transmissions);
    baseline_checks(s, &r, &b, ch.eta);
    run.records = campaign_records(&r.records);
    run.plots.push(("transmissions".into(), transmission_histogram(&r)));
    Ok(())
}

fn budget(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let p = biphoton(c);
    let ch = channel(c)?;
    let b = baseline_params(c);
    let (n, seed) = (c.trials.expect("validated"), c.seed.expect("validated"));
    let ent = run_lossy_campaign(&p, &ch, n, seed).ctx("entangled campaign")?;
    let base = run_unentangled_baseline(n, ch.eta, &b, &ch, seed).ctx("baseline")?;
    let s = &mut run.summary;
    campaign_summary(s, "entangled", &ent);
    campaign_summary(s, "baseline", &base);
    let (m1, m2) = (ent.budget.mean_transmissions, base.budget.mean_transmissions);
    let ratio = m1 / m2;
    let se = ratio * ((ent.budget.se / m1).powi(2) + (base.budget.se / m2).powi(2)).sqrt();
    s.f("budget_ratio_entangled_to_baseline", ratio);
    s.f("budget_ratio_se", se);
    budget_check(s, "entangled_transmissions_one_over_eta", &ent, 1.0 / ch.eta, (1.0 - ch.eta).sqrt() / ch.eta);
    baseline_checks(s, &base, &b, ch.eta);
    if b.policy == BaselinePolicy::AlternatePerDetection {
        let z = (ratio - 0.5) / se;
        s.check("budget_ratio_one_half", z.abs() <= 4.0, format!("{} , z = {:+.2}", num(ratio), z));
    }
    let mut t = Table::new("scheme(0=entangled,1=baseline) stream transmissions delta_t_estimate delta_omega_estimate");
    for (k, r) in [&ent, &base].iter().enumerate() {
        for x in &r.records {
            t.row(&[k.to_string(), x.stream.to_string(), x.transmissions_used.to_string(), num(x.estimates[0]), num(x.estimates[1])]);
        }
    }
    run.records = t.text;
    run.plots.push(("entangled_transmissions".into(), transmission_histogram(&ent)));
    run.plots.push(("baseline_transmissions".into(), transmission_histogram(&base)));
    Ok(())
}

fn hl(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let g = c.glm.as_ref().expect("validated config has [glm]");
    let ch = ChannelParams { eta: 1.0, ..channel(c)? };
    let gs = GlmParams::new(1, g.signal_width, Rep::Time, g.signal_width * g.epsilon_fractions[0]);
    let gi = GlmParams::new(1, g.idler_width, Rep::Frequency, g.idler_width * g.epsilon_fractions[0]);
    let scan = hl_scan(&gs, &gi, &g.photons, &g.epsilon_fractions, &ch, c.trials.expect("validated"), c.seed.expect("validated"))
        .ctx("HL scan")?;
    let s = &mut run.summary;
    let mut rec = Table::new("photons epsilon_fraction stream delta_t_estimate[u] delta_omega_estimate[rad/u]");
    let mut pt = Table::new("photons delay_rms");
    let mut pw = Table::new("photons doppler_rms");
    let mut worst_form = 0.0f64;
    for p in &scan.points {
        let m = p.m as f64;
        let key = format!("m{}", p.m);
        s.f(&format!("{key}.delay_rms_extrapolated"), p.delay.value);
        s.f(&format!("{key}.delay_rms_extrapolated_se"), p.delay.se);
        s.f(&format!("{key}.delay_oracle"), p.closed_form.0);
        s.f(&format!("{key}.delay_1_over_2mw"), 1.0 / (2.0 * m * g.idler_width));
        s.f(&format!("{key}.doppler_rms_extrapolated"), p.doppler.value);
        s.f(&format!("{key}.doppler_rms_extrapolated_se"), p.doppler.se);
        s.f(&format!("{key}.doppler_oracle"), p.closed_form.1);
        s.f(&format!("{key}.doppler_1_over_2mt"), 1.0 / (2.0 * m * g.signal_width));
        for (run_idx, r) in p.runs.iter().enumerate() {
            let frac = g.epsilon_fractions[run_idx];
            let d = r.delay.expect("entangled scheme estimates delay");
            let w = r.doppler.expect("entangled scheme estimates Doppler");
            s.f(&format!("{key}.eps{run_idx}.delay_rms"), d.stats.rms);
            s.f(&format!("{key}.eps{run_idx}.delay_analytic_std"), d.analytic_std);
            s.f(&format!("{key}.eps{run_idx}.doppler_rms"), w.stats.rms);
            s.f(&format!("{key}.eps{run_idx}.doppler_analytic_std"), w.analytic_std);
            if let Some(cmp) = r.product_form_check {
                worst_form = worst_form.max(cmp.max_diff());
            }
            for x in &r.records {
                rec.row(&[p.m.to_string(), num(frac), x.stream.to_string(), num(x.estimates[0]), num(x.estimates[1])]);
            }
        }
        let (ok, d) = within(p.delay.value, p.closed_form.0, 0.03);
        s.check(&format!("{key}_delay_constant_3pct"), ok, d);
        let (ok, d) = within(p.doppler.value, p.closed_form.1, 0.03);
        s.check(&format!("{key}_doppler_constant_3pct"), ok, d);
        pt.row(&[p.m.to_string(), num(p.delay.value)]);
        pw.row(&[p.m.to_string(), num(p.doppler.value)]);
    }
    s.f("delay_slope", scan.delay_slope.0);
    s.f("delay_slope_se", scan.delay_slope.1);
    s.f("doppler_slope", scan.doppler_slope.0);
    s.f("doppler_slope_se", scan.doppler_slope.1);
    s.f("product_form_max_diff", worst_form);
    s.check("product_form_matches_pipeline", worst_form < 1e-9, format!("{worst_form:e}"));
    s.check(
        "delay_slope_minus_one",
        (scan.delay_slope.0 + 1.0).abs() <= 0.05,
        num(scan.delay_slope.0),
    );
    s.check(
        "doppler_slope_minus_one",
        (scan.doppler_slope.0 + 1.0).abs() <= 0.05,
        num(scan.doppler_slope.0),
    );
    run.records = rec.text;
    run.plots.push(("delay".into(), pt.text));
    run.plots.push(("doppler".into(), pw.text));
    Ok(())
}

fn glm_direct(c: &ScenarioConfig, run: &mut Run) -> Result<(), RunError> {
    let g = c.glm.as_ref().expect("validated config has [glm]");
    let (n, seed) = (c.trials.expect("validated"), c.seed.expect("validated"));
    let w = g.idler_width;
    let s = &mut run.summary;
    let mut rec = Table::new("photons epsilon_fraction stream delta_t_estimate[u]");
    let mut plot = Table::new("photons delay_rms");
    for &m in &g.photons {
        let key = format!("m{m}");
        let mut pts = Vec::new();
        let mut last = None;
        for (i, &f) in g.epsilon_fractions.iter().enumerate() {
            let params = GlmParams::new(m, w, Rep::Frequency, f * w);
            let r = direct_glm_delay_experiment(&params, g.delay, n, seed).ctx("direct GLM experiment")?;
            let d = r.delay.expect("delay estimated");
            s.f(&format!("{key}.eps{i}.rms"), d.stats.rms);
            s.f(&format!("{key}.eps{i}.analytic_std"), d.analytic_std);
            pts.push(EpsilonPoint { epsilon: f, rms: d.stats.rms, se: d.stats.rms_se });
            for x in &r.records {
                rec.row(&[m.to_string(), num(f), x.stream.to_string(), num(x.estimates[0])]);
            }
            last = Some(d);
        }
        let x = epsilon_extrapolate(&pts).ctx("epsilon extrapolation")?;
        let expected = 1.0 / (2.0 * m as f64 * w);
        s.f(&format!("{key}.rms_extrapolated"), x.value);
        s.f(&format!("{key}.rms_extrapolated_se"), x.se);
        s.f(&format!("{key}.hl_1_over_2mw"), expected);
        let (ok, d) = within(x.value, expected, 0.03);
        s.check(&format!("{key}_hl_3pct"), ok, d);
        if let Some(d) = last {
            s.check(
                &format!("{key}_unbiased"),
                d.stats.unbiased_within(4.0),
                format!("bias {} with se {}", num(d.stats.bias), num(d.stats.bias_se)),
            );
        }
        plot.row(&[m.to_string(), num(x.value)]);
    }
    run.records = rec.text;
    run.plots.push(("delay".into(), plot.text));
    Ok(())
}

fn sdc(run: &mut Run) {
    let s = &mut run.summary;
    let mut rec = Table::new("b1 b2 decoded_b1 decoded_b2 p_b_one p_a_minus identity_residual");
    let mut plot = Table::new("encoding_index identity_residual");
    let mut decoded = 0;
    let mut worst = 0.0f64;
    let mut degenerate = true;
    for (k, (b1, b2)) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let out = sdc_run(b1, b2).expect("bits in range");
        let res = sdc_operator_identity(b1, b2).expect("bits in range");
        decoded += usize::from(out.bits == (b1, b2));
        worst = worst.max(res);
        let (p1, p2) = out.probabilities;
        degenerate &= (p1 - b1 as f64).abs() < 1e-12 && (p2 - b2 as f64).abs() < 1e-12;
        s.kv(&format!("decode.{b1}{b2}"), format!("{}{}", out.bits.0, out.bits.1));
        s.kv(&format!("residual.{b1}{b2}"), format!("{res:e}"));
        rec.row(&[b1.to_string(), b2.to_string(), out.bits.0.to_string(), out.bits.1.to_string(), num(p1), num(p2), num(res)]);
        plot.row(&[k.to_string(), num(res)]);
    }
    s.kv("decoded", format!("{decoded}/4"));
    s.check("decodes_4_of_4", decoded == 4, format!("{decoded}/4"));
    s.check("deterministic_decoding", degenerate, "outcome probabilities are 0 or 1 to 1e-12".into());
    s.check("operator_identity", worst < 1e-12, format!("max residual {worst:e}"));
    run.records = rec.text;
    run.plots.push(("residuals".into(), plot.text));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_config_text, parse_config};

    fn config(e: Experiment) -> ScenarioConfig {
        parse_config(&default_config_text(e)).unwrap()
    }

    #[test]
    fn histogram_is_a_density() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 100.0).collect();
        let h = histogram("x p", &xs, 0.0, 10.0, 20);
        let rows: Vec<(f64, f64)> = h
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(' ').map(|v| v.parse::<f64>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[0].0, 0.25);
        let mass: f64 = rows.iter().map(|r| r.1 * 0.5).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_layout() {
        let out = run_scenario(&config(Experiment::SdcDemo)).unwrap();
        let s = out.file("summary.txt").unwrap();
        assert!(s.starts_with("experiment = sdc-demo\nconfig_sha256 = "));
        assert!(s.ends_with("checks_passed = 3/3\nresult = PASS\n"));
        assert!(out.all_pass());
        assert_eq!(out.files.len(), 3);
        assert!(out.file("plot_residuals.dat").is_some());
    }

    #[test]
    fn hash_tracks_the_configuration() {
        let hash = |c: &ScenarioConfig| {
            let out = run_scenario(c).unwrap();
            out.file("summary.txt").unwrap().lines().nth(1).unwrap().to_string()
        };
        let mut c = config(Experiment::Crlb);
        let h0 = hash(&c);
        assert_eq!(hash(&c), h0);
        c.biphoton.as_mut().unwrap().sigma_cor = 0.2;
        assert_ne!(hash(&c), h0);
    }

    #[test]
    fn unentangled_crlb_recovers_arthurs_kelly() {
        let mut c = config(Experiment::Crlb);
        let b = c.biphoton.as_mut().unwrap();
        (b.sigma_coh, b.sigma_cor) = (1.0, 2.0);
        let out = run_scenario(&c).unwrap();
        let s = out.file("summary.txt").unwrap();
        assert!(s.contains("Arthurs-Kelly inequality is recovered"), "{s}");
        assert!(s.contains("entropy.oracle_bits = "));
        assert!(out.all_pass());
    }

    #[test]
    fn single_shot_reports_target_estimates() {
        let out = run_scenario(&config(Experiment::SingleShot)).unwrap();
        let s = out.file("summary.txt").unwrap();
        for key in ["estimate.range = ", "estimate.radial_velocity = ", "estimator.delta_t.std = 0.1"] {
            assert!(s.contains(key), "{key}");
        }
        assert_eq!(out.file("records.txt").unwrap().lines().count(), 2);
    }
}
