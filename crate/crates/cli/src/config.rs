//! Scenario configuration: `[section]` headers, `key = value` lines, `#`
//! comments.
//!
//! Parsing fills in every default, so [`serialize`] writes a complete,
//! canonical document and `parse(serialize(c)) == c`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use qlidar::montecarlo::BaselinePolicy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: `{key}`: {message}")]
    TypeError { key: String, line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingRequired(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Crlb,
    SingleShot,
    MonteCarlo,
    Lossy,
    Baseline,
    HlScan,
    GlmDirect,
    SdcDemo,
    Budget,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Crlb,
        Experiment::SingleShot,
        Experiment::MonteCarlo,
        Experiment::Lossy,
        Experiment::Baseline,
        Experiment::HlScan,
        Experiment::GlmDirect,
        Experiment::SdcDemo,
        Experiment::Budget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Crlb => "crlb",
            Experiment::SingleShot => "single-shot",
            Experiment::MonteCarlo => "monte-carlo",
            Experiment::Lossy => "lossy",
            Experiment::Baseline => "baseline",
            Experiment::HlScan => "hl-scan",
            Experiment::GlmDirect => "glm-direct",
            Experiment::SdcDemo => "sdc-demo",
            Experiment::Budget => "budget",
        }
    }

    fn is_random(self) -> bool {
        !matches!(self, Experiment::Crlb | Experiment::SdcDemo)
    }

    fn needs_trials(self) -> bool {
        self.is_random() && self != Experiment::SingleShot
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonSection {
    pub sigma_coh: f64,
    pub sigma_cor: f64,
    pub delta_omega: f64,
    pub omega_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSection {
    /// Absent when a `[target]` section supplies the shifts.
    pub delta_t_s: Option<f64>,
    pub delta_omega_s: Option<f64>,
    pub delta_t_i: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSection {
    pub range: f64,
    pub radial_velocity: f64,
    pub carrier: f64,
    pub light_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSection {
    pub t0: f64,
    pub policy: BaselinePolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmSection {
    pub photons: Vec<usize>,
    /// Signal (time-domain) width `T` of the entangled scheme.
    pub signal_width: f64,
    /// Idler (frequency-domain) width `W`; also the width of the direct
    /// delay experiment.
    pub idler_width: f64,
    /// Regularisation widths as fractions of the state width.
    pub epsilon_fractions: Vec<f64>,
    /// Delay applied in the direct experiment.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub records: String,
    pub summary: String,
    pub plot_prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            records: "records.txt".into(),
            summary: "summary.txt".into(),
            plot_prefix: "plot".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    /// Seed of the independent lossless reference campaign.
    pub reference_seed: Option<u64>,
    pub biphoton: Option<BiphotonSection>,
    pub channel: Option<ChannelSection>,
    pub target: Option<TargetSection>,
    pub baseline: Option<BaselineSection>,
    pub glm: Option<GlmSection>,
    pub output: OutputSection,
}

const SECTIONS: [(&str, &[&str]); 7] = [
    ("scenario", &["experiment", "seed", "trials", "reference_seed"]),
    ("biphoton", &["sigma_coh", "sigma_cor", "delta_omega", "omega_p"]),
    ("channel", &["delta_t_s", "delta_omega_s", "delta_t_i", "eta"]),
    ("target", &["range", "radial_velocity", "carrier", "light_speed"]),
    ("baseline", &["t0", "policy"]),
    ("glm", &["photons", "signal_width", "idler_width", "epsilon_fractions", "delay"]),
    ("output", &["records", "summary", "plot_prefix"]),
];

fn policy_name(p: BaselinePolicy) -> &'static str {
    match p {
        BaselinePolicy::AlternatePerDetection => "alternate-per-detection",
        BaselinePolicy::AlternatePerTransmission => "alternate-per-transmission",
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Raw `section.key -> value` table with line numbers.
struct Table {
    entries: BTreeMap<String, Entry>,
    sections: Vec<String>,
}

impl Table {
    fn has_section(&self, s: &str) -> bool {
        self.sections.iter().any(|x| x == s)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| ConfigError::TypeError {
                key: key.into(),
                line: e.line,
                message: format!("cannot parse `{}` as {}", e.value, std::any::type_name::<T>()),
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)?.ok_or_else(|| ConfigError::MissingRequired(key.into()))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|_| ConfigError::TypeError {
                    key: key.into(),
                    line: e.line,
                    message: format!("cannot parse list entry `{}`", s.trim()),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Rejects a present value that fails `ok`.
    fn check(&self, key: &str, ok: bool, message: &str) -> Result<(), ConfigError> {
        match (ok, self.raw(key)) {
            (false, Some(e)) => Err(ConfigError::TypeError { key: key.into(), line: e.line, message: message.into() }),
            (false, None) => Err(ConfigError::MissingRequired(key.into())),
            _ => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> Result<Table, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut sections = Vec::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("malformed section header `{content}`") })?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::UnknownKey { key: format!("[{name}]"), line });
            }
            if sections.iter().any(|s| s == name) {
                return Err(ConfigError::Syntax { line, message: format!("section [{name}] repeated") });
            }
            sections.push(name.to_string());
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_deref()
            .ok_or_else(|| ConfigError::Syntax { line, message: "key outside any section".into() })?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        let full = format!("{section}.{key}");
        if !allowed.contains(&key) {
            return Err(ConfigError::UnknownKey { key: full, line });
        }
        if entries.contains_key(&full) {
            return Err(ConfigError::Syntax { line, message: format!("`{full}` given twice") });
        }
        entries.insert(full, Entry { value: value.to_string(), line });
    }
    Ok(Table { entries, sections })
}

fn positive(t: &Table, key: &str, v: f64) -> Result<(), ConfigError> {
    t.check(key, v.is_finite() && v > 0.0, &format!("must be positive and finite, got {v}"))
}

fn finite(t: &Table, key: &str, v: f64) -> Result<(), ConfigError> {
    t.check(key, v.is_finite(), &format!("must be finite, got {v}"))
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let t = tokenize(text)?;
    let experiment: Experiment = match t.raw("scenario.experiment") {
        None => return Err(ConfigError::MissingRequired("scenario.experiment".into())),
        Some(e) => e.value.parse().map_err(|m| ConfigError::TypeError {
            key: "scenario.experiment".into(),
            line: e.line,
            message: m,
        })?,
    };
    let seed = t.get::<u64>("scenario.seed")?;
    if experiment.is_random() && seed.is_none() {
        return Err(ConfigError::MissingRequired("scenario.seed".into()));
    }
    let trials = t.get::<usize>("scenario.trials")?;
    if experiment.needs_trials() && trials.is_none() {
        return Err(ConfigError::MissingRequired("scenario.trials".into()));
    }
    if let Some(n) = trials {
        t.check("scenario.trials", n >= 2, "must be at least 2")?;
        if matches!(experiment, Experiment::MonteCarlo | Experiment::Lossy | Experiment::Baseline | Experiment::Budget) {
            t.check(
                "scenario.trials",
                n >= qlidar::montecarlo::MIN_TRIALS,
                &format!("campaigns need at least {} trials", qlidar::montecarlo::MIN_TRIALS),
            )?;
        }
    }
    let reference_seed = t.get::<u64>("scenario.reference_seed")?;

    let biphoton = if t.has_section("biphoton") {
        let b = BiphotonSection {
            sigma_coh: t.require("biphoton.sigma_coh")?,
            sigma_cor: t.require("biphoton.sigma_cor")?,
            delta_omega: t.get("biphoton.delta_omega")?.unwrap_or(0.0),
            omega_p: t.get("biphoton.omega_p")?.unwrap_or(0.0),
        };
        positive(&t, "biphoton.sigma_coh", b.sigma_coh)?;
        positive(&t, "biphoton.sigma_cor", b.sigma_cor)?;
        finite(&t, "biphoton.delta_omega", b.delta_omega)?;
        finite(&t, "biphoton.omega_p", b.omega_p)?;
        Some(b)
    } else {
        None
    };

    let target = if t.has_section("target") {
        let s = TargetSection {
            range: t.require("target.range")?,
            radial_velocity: t.get("target.radial_velocity")?.unwrap_or(0.0),
            carrier: t.require("target.carrier")?,
            light_speed: t.get("target.light_speed")?.unwrap_or(1.0),
        };
        t.check("target.range", s.range.is_finite() && s.range >= 0.0, "must be non-negative")?;
        positive(&t, "target.light_speed", s.light_speed)?;
        t.check(
            "target.radial_velocity",
            s.radial_velocity.abs() < s.light_speed,
            "speed must be below the light speed",
        )?;
        finite(&t, "target.carrier", s.carrier)?;
        Some(s)
    } else {
        None
    };

    let channel = if t.has_section("channel") {
        let c = ChannelSection {
            delta_t_s: t.get("channel.delta_t_s")?,
            delta_omega_s: t.get("channel.delta_omega_s")?,
            delta_t_i: t.get("channel.delta_t_i")?.unwrap_or(0.0),
            eta: t.get("channel.eta")?.unwrap_or(1.0),
        };
        t.check("channel.eta", c.eta > 0.0 && c.eta <= 1.0, &format!("transmissivity must lie in (0, 1], got {}", c.eta))?;
        finite(&t, "channel.delta_t_i", c.delta_t_i)?;
        for (key, v) in [("channel.delta_t_s", c.delta_t_s), ("channel.delta_omega_s", c.delta_omega_s)] {
            match (v, &target) {
                (Some(_), Some(_)) => {
                    t.check(key, false, "shifts come from [target] when that section is present")?;
                }
                (None, None) => return Err(ConfigError::MissingRequired(key.into())),
                (Some(x), None) => finite(&t, key, x)?,
                (None, Some(_)) => {}
            }
        }
        Some(c)
    } else {
        None
    };

    let baseline = if t.has_section("baseline") {
        let policy = match t.raw("baseline.policy") {
            None => BaselinePolicy::AlternatePerDetection,
            Some(e) => [BaselinePolicy::AlternatePerDetection, BaselinePolicy::AlternatePerTransmission]
                .into_iter()
                .find(|p| policy_name(*p) == e.value)
                .ok_or_else(|| ConfigError::TypeError {
                    key: "baseline.policy".into(),
                    line: e.line,
                    message: format!("unknown policy `{}`", e.value),
                })?,
        };
        let b = BaselineSection { t0: t.require("baseline.t0")?, policy };
        positive(&t, "baseline.t0", b.t0)?;
        Some(b)
    } else {
        None
    };

    let glm = if t.has_section("glm") {
        let g = GlmSection {
            photons: t.list("glm.photons")?.ok_or_else(|| ConfigError::MissingRequired("glm.photons".into()))?,
            signal_width: t.get("glm.signal_width")?.unwrap_or(1.0),
            idler_width: t.get("glm.idler_width")?.unwrap_or(1.0),
            epsilon_fractions: t.list("glm.epsilon_fractions")?.unwrap_or_else(|| vec![0.04, 0.02, 0.01]),
            delay: t.get("glm.delay")?.unwrap_or(0.0),
        };
        t.check(
            "glm.photons",
            !g.photons.is_empty() && g.photons.iter().all(|&m| (1..=qlidar::glm::MAX_PHOTONS).contains(&m)),
            &format!("photon counts must lie in 1..={}", qlidar::glm::MAX_PHOTONS),
        )?;
        positive(&t, "glm.signal_width", g.signal_width)?;
        positive(&t, "glm.idler_width", g.idler_width)?;
        t.check(
            "glm.epsilon_fractions",
            g.epsilon_fractions.len() >= 3 && g.epsilon_fractions.iter().all(|&f| f > 0.0 && f <= 0.1),
            "need at least three fractions in (0, 0.1]",
        )?;
        finite(&t, "glm.delay", g.delay)?;
        Some(g)
    } else {
        None
    };

    let defaults = OutputSection::default();
    let output = OutputSection {
        records: t.get("output.records")?.unwrap_or(defaults.records),
        summary: t.get("output.summary")?.unwrap_or(defaults.summary),
        plot_prefix: t.get("output.plot_prefix")?.unwrap_or(defaults.plot_prefix),
    };

    let c = ScenarioConfig {
        experiment,
        seed,
        trials,
        reference_seed,
        biphoton,
        channel,
        target,
        baseline,
        glm,
        output,
    };
    check_required_sections(&c)?;
    Ok(c)
}

fn check_required_sections(c: &ScenarioConfig) -> Result<(), ConfigError> {
    use Experiment::*;
    let need = |present: bool, name: &str| {
        if present {
            Ok(())
        } else {
            Err(ConfigError::MissingRequired(format!("[{name}]")))
        }
    };
    match c.experiment {
        Crlb => need(c.biphoton.is_some(), "biphoton"),
        SingleShot | MonteCarlo | Lossy => {
            need(c.biphoton.is_some(), "biphoton")?;
            need(c.channel.is_some(), "channel")
        }
        Baseline => {
            need(c.channel.is_some(), "channel")?;
            need(c.baseline.is_some(), "baseline")
        }
        Budget => {
            need(c.biphoton.is_some(), "biphoton")?;
            need(c.channel.is_some(), "channel")?;
            need(c.baseline.is_some(), "baseline")
        }
        HlScan | GlmDirect => need(c.glm.is_some(), "glm"),
        SdcDemo => Ok(()),
    }
}

fn list<T: fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Canonical text form. Floats use the shortest representation that
/// round-trips.
pub fn serialize(c: &ScenarioConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[scenario]\nexperiment = {}", c.experiment);
    if let Some(v) = c.seed {
        let _ = writeln!(s, "seed = {v}");
    }
    if let Some(v) = c.trials {
        let _ = writeln!(s, "trials = {v}");
    }
    if let Some(v) = c.reference_seed {
        let _ = writeln!(s, "reference_seed = {v}");
    }
    if let Some(b) = &c.biphoton {
        let _ = write!(
            s,
            "\n[biphoton]\nsigma_coh = {:?}\nsigma_cor = {:?}\ndelta_omega = {:?}\nomega_p = {:?}\n",
            b.sigma_coh, b.sigma_cor, b.delta_omega, b.omega_p
        );
    }
    if let Some(ch) = &c.channel {
        s.push_str("\n[channel]\n");
        if let Some(v) = ch.delta_t_s {
            let _ = writeln!(s, "delta_t_s = {v:?}");
        }
        if let Some(v) = ch.delta_omega_s {
            let _ = writeln!(s, "delta_omega_s = {v:?}");
        }
        let _ = writeln!(s, "delta_t_i = {:?}\neta = {:?}", ch.delta_t_i, ch.eta);
    }
    if let Some(t) = &c.target {
        let _ = write!(
            s,
            "\n[target]\nrange = {:?}\nradial_velocity = {:?}\ncarrier = {:?}\nlight_speed = {:?}\n",
            t.range, t.radial_velocity, t.carrier, t.light_speed
        );
    }
    if let Some(b) = &c.baseline {
        let _ = write!(s, "\n[baseline]\nt0 = {:?}\npolicy = {}\n", b.t0, policy_name(b.policy));
    }
    if let Some(g) = &c.glm {
        let _ = write!(
            s,
            "\n[glm]\nphotons = {}\nsignal_width = {:?}\nidler_width = {:?}\nepsilon_fractions = {}\ndelay = {:?}\n",
            list(&g.photons),
            g.signal_width,
            g.idler_width,
            list(&g.epsilon_fractions),
            g.delay
        );
    }
    let _ = write!(
        s,
        "\n[output]\nrecords = {}\nsummary = {}\nplot_prefix = {}\n",
        c.output.records, c.output.summary, c.output.plot_prefix
    );
    s
}

/// Built-in scenario used when no `--config` is given.
pub fn default_config_text(e: Experiment) -> String {
    let body = match e {
        Experiment::Crlb => "[biphoton]\nsigma_coh = 10\nsigma_cor = 0.1\n",
        Experiment::SingleShot => {
            "seed = 42\n\n[biphoton]\nsigma_coh = 10\nsigma_cor = 0.1\n\n[channel]\ndelta_t_i = 5\n\n\
             [target]\nrange = 1.5\nradial_velocity = 0.001\ncarrier = 100\nlight_speed = 1\n"
        }
        Experiment::MonteCarlo => {
            "seed = 42\ntrials = 100000\n\n[biphoton]\nsigma_coh = 10\nsigma_cor = 0.1\n\n\
             [channel]\ndelta_t_s = 3\ndelta_omega_s = 0.2\ndelta_t_i = 5\n"
        }
        Experiment::Lossy => {
            "seed = 1042\ntrials = 10000\nreference_seed = 42\n\n[biphoton]\nsigma_coh = 10\nsigma_cor = 0.1\n\n\
             [channel]\ndelta_t_s = 3\ndelta_omega_s = 0.2\ndelta_t_i = 5\neta = 0.01\n"
        }
        Experiment::Baseline => {
            "seed = 42\ntrials = 10000\n\n[channel]\ndelta_t_s = 3\ndelta_omega_s = 0.2\neta = 0.01\n\n[baseline]\nt0 = 1\n"
        }
        Experiment::Budget => {
            "seed = 42\ntrials = 10000\n\n[biphoton]\nsigma_coh = 10\nsigma_cor = 0.1\n\n\
             [channel]\ndelta_t_s = 3\ndelta_omega_s = 0.2\ndelta_t_i = 5\neta = 0.01\n\n[baseline]\nt0 = 1\n"
        }
        Experiment::HlScan => {
            "seed = 42\ntrials = 20000\n\n[channel]\ndelta_t_s = 3\ndelta_omega_s = 0.2\ndelta_t_i = 5\n\n\
             [glm]\nphotons = 1, 2, 4, 8, 16\nsignal_width = 2\nidler_width = 5\nepsilon_fractions = 0.04, 0.02, 0.01\n"
        }
        Experiment::GlmDirect => {
            "seed = 42\ntrials = 20000\n\n[glm]\nphotons = 1, 4\nidler_width = 5\n\
             epsilon_fractions = 0.04, 0.02, 0.01\ndelay = 3\n"
        }
        Experiment::SdcDemo => "",
    };
    format!("[scenario]\nexperiment = {e}\n{body}")
}
