//! Command-line front end: argument parsing, overrides and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{default_config_text, parse_config, serialize, ConfigError, Experiment};
use crate::scenario::run_scenario;

/// Entangled-photon lidar simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information, joint bounds and entanglement entropy.
    Crlb(Opts),
    /// One simulated detection and its estimates.
    SingleShot(Opts),
    /// Monte Carlo campaign of the entangled single-photon scheme.
    MonteCarlo(Opts),
    /// Campaign with idler storage loss.
    Lossy(Opts),
    /// Unentangled alternating time/frequency baseline.
    Baseline(Opts),
    /// Photon budget of entangled versus baseline schemes.
    Budget(Opts),
    /// Multi-photon scaling scan.
    HlScan(Opts),
    /// Direct multi-photon delay estimation without entanglement swap.
    GlmDirect(Opts),
    /// Two-qubit superdense coding demonstration.
    SdcDemo(Opts),
}

#[derive(Args)]
struct Opts {
    /// Scenario file; the built-in scenario is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl Command {
    fn split(self) -> (Experiment, Opts) {
        match self {
            Command::Crlb(o) => (Experiment::Crlb, o),
            Command::SingleShot(o) => (Experiment::SingleShot, o),
            Command::MonteCarlo(o) => (Experiment::MonteCarlo, o),
            Command::Lossy(o) => (Experiment::Lossy, o),
            Command::Baseline(o) => (Experiment::Baseline, o),
            Command::Budget(o) => (Experiment::Budget, o),
            Command::HlScan(o) => (Experiment::HlScan, o),
            Command::GlmDirect(o) => (Experiment::GlmDirect, o),
            Command::SdcDemo(o) => (Experiment::SdcDemo, o),
        }
    }
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

fn fail(code: u8, msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    code
}

/// Runs one invocation and returns its exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let (experiment, opts) = cli.command.split();
    let text = match &opts.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_CONFIG, format!("reading {}: {e}", path.display())),
        },
        None => default_config_text(experiment),
    };
    let config = parse_config(&text).and_then(|mut c| {
        if c.experiment != experiment {
            return Err(ConfigError::TypeError {
                key: "scenario.experiment".into(),
                line: 0,
                message: format!("config is for `{}`, subcommand is `{experiment}`", c.experiment),
            });
        }
        c.seed = opts.seed.or(c.seed);
        c.trials = opts.trials.or(c.trials);
        // revalidate the overridden values
        parse_config(&serialize(&c))
    });
    let config = match config {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if opts.print_config {
        print!("{}", serialize(&config));
        return EXIT_PASS;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(opts.threads).build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    let output = match pool.install(|| run_scenario(&config)) {
        Ok(o) => o,
        Err(e) => return fail(EXIT_RUNTIME, e),
    };
    if let Err(e) = output.write_to(&opts.out) {
        return fail(EXIT_RUNTIME, e);
    }
    for c in &output.checks {
        println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if output.all_pass() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &std::path::Path, args: &[&str]) -> u8 {
        let mut full = vec!["qlidar"];
        full.extend_from_slice(args);
        full.extend_from_slice(&["--out", dir.to_str().unwrap()]);
        run(full)
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["sdc-demo"]), EXIT_PASS);
        assert!(dir.path().join("summary.txt").exists());
        assert_eq!(run_in(dir.path(), &["monte-carlo", "--trials", "50"]), EXIT_CONFIG);
        assert_eq!(run_in(dir.path(), &["crlb", "--config", "/nonexistent/scenario.cfg"]), EXIT_CONFIG);
        assert_eq!(run(["qlidar", "no-such-experiment"]), EXIT_CONFIG);

        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, default_config_text(Experiment::Crlb)).unwrap();
        assert_eq!(run_in(dir.path(), &["sdc-demo", "--config", cfg.to_str().unwrap()]), EXIT_CONFIG);
        std::fs::write(&cfg, default_config_text(Experiment::Lossy).replace("eta = 0.01", "eta = 1.5")).unwrap();
        assert_eq!(run_in(dir.path(), &["lossy", "--config", cfg.to_str().unwrap()]), EXIT_CONFIG);
    }

    #[test]
    fn failed_check_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        // ten trials cannot resolve a 2% rms tolerance
        let text = default_config_text(Experiment::HlScan).replace("trials = 20000", "trials = 10");
        let cfg = dir.path().join("hl.cfg");
        std::fs::write(&cfg, text).unwrap();
        assert_eq!(run_in(dir.path(), &["hl-scan", "--config", cfg.to_str().unwrap()]), EXIT_FAIL);
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.ends_with("result = FAIL\n"));
    }

    #[test]
    fn overrides_change_the_hash_and_thread_count_does_not() {
        let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(run_in(a.path(), &["baseline", "--trials", "500", "--threads", "1"]), EXIT_PASS);
        assert_eq!(run_in(b.path(), &["baseline", "--trials", "500", "--threads", "3"]), EXIT_PASS);
        assert_eq!(run_in(c.path(), &["baseline", "--trials", "500", "--seed", "7"]), EXIT_PASS);
        for f in ["records.txt", "summary.txt", "plot_transmissions.dat"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
            assert_ne!(x, std::fs::read(c.path().join(f)).unwrap(), "{f}");
        }
    }
}
