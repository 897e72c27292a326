//! `qoct`: scenario-driven simulation and analysis. Every command is a
//! function of its scenario and seed, writing into `--out` with a
//! hash manifest.

mod commands;
mod config;
mod error;
mod sim;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qoct_core::interferometer::InterferogramKind;

use crate::config::Scenario;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "qoct", version, about = "Quantum OCT in a Michelson interferometer: simulate, analyse, reconstruct")]
struct Cli {
    /// Seed for every random stream; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "qoct-out")]
    out: PathBuf,
    /// Bundled scenario: proof_of_concept, defectoscopy or dispersion.
    #[arg(long, global = true, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Single,
    Auto,
    Cross,
}

impl From<Kind> for InterferogramKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Single => InterferogramKind::Single,
            Kind::Auto => InterferogramKind::Auto,
            Kind::Cross => InterferogramKind::Cross,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ideal and measured interferograms of the scenario.
    Simulate,
    /// Spectrum, low-pass HOM extraction and fits of one trace.
    Analyze {
        /// Interferogram CSV, or a `runs` directory written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// Trace to average when `--input` is a run directory.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Low-pass cutoff in units of the pump frequency.
        #[arg(long)]
        cutoff_wp: Option<f64>,
    },
    /// Dispersion broadening factors of a window and their thickness sweep.
    Dispersion {
        #[arg(long)]
        material: Option<String>,
        #[arg(long)]
        thickness_mm: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Gap between two interfaces from a coincidence trace.
    Reconstruct {
        /// Interferogram CSV or run directory; the scenario is simulated otherwise.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Repeat with this many further seeds and histogram the gaps.
        #[arg(long, default_value_t = 0)]
        sweep: usize,
    },
    /// Gaussian fit of a tabulated photon spectrum.
    SpectrumFit {
        /// Spectrum CSV; defaults to the scenario's `spectrum_path`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn scenario(cli: &Cli) -> CliResult<Option<Scenario>> {
    match (&cli.preset, &cli.config) {
        (Some(p), _) => config::preset(p).map(Some),
        (None, Some(c)) => config::load(c).map(Some),
        (None, None) => Ok(None),
    }
}

/// Analysis commands only need the source; they fall back to the
/// proof-of-concept preset.
fn scenario_or_default(cli: &Cli) -> CliResult<Scenario> {
    match scenario(cli)? {
        Some(s) => Ok(s),
        None => {
            log::info!("no scenario given, using the proof_of_concept preset");
            config::preset("proof_of_concept")
        }
    }
}

fn required(cli: &Cli, command: &str) -> CliResult<Scenario> {
    scenario(cli)?.ok_or_else(|| CliError::config(format!("{command} needs --preset or --config")))
}

fn run(cli: &Cli) -> CliResult<()> {
    let out: &Path = &cli.out;
    match &cli.command {
        Command::Simulate => {
            let sc = required(cli, "simulate")?;
            commands::simulate(&sc, cli.seed.unwrap_or(sc.seed), out)
        }
        Command::Analyze { input, kind, cutoff_wp } => {
            let sc = scenario_or_default(cli)?;
            let cutoff = cutoff_wp.unwrap_or(sc.analysis.cutoff);
            commands::analyze(&sc, input, kind.map(Into::into), cutoff, cli.seed.unwrap_or(sc.seed), out)
        }
        Command::Dispersion {
            material,
            thickness_mm,
            points,
        } => {
            let sc = scenario_or_default(cli)?;
            commands::dispersion(&sc, material.as_deref(), *thickness_mm, *points, out)
        }
        Command::Reconstruct { trace, sweep } => {
            let sc = scenario(cli)?;
            let seed = cli.seed.or(sc.as_ref().map(|s| s.seed)).unwrap_or(0);
            commands::reconstruct(sc.as_ref(), trace.as_deref(), *sweep, seed, out)
        }
        Command::SpectrumFit { input } => {
            let sc = scenario_or_default(cli)?;
            commands::spectrum_fit(&sc, input.as_deref(), out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qoct: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
