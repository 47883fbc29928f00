//! Command-line front end: runs the named experiments from scenario files
//! and writes CSV outputs with a manifest.

mod config;
mod experiments;
mod output;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{Config, ConfigError};
use experiments::Experiment;
use output::Outputs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Physics(#[from] biphoton::Error),

    #[error("{0}")]
    Input(String),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),

    #[error("cannot write output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration or input files,
    /// 3 for failures of the physics or fitting layers.
    fn exit_code(&self) -> u8 {
        use biphoton::Error as E;
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Output(_) | CliError::Write(_) | CliError::Csv(_) => 2,
            CliError::Physics(e) => match e {
                E::InvalidArgument(_) | E::Configuration(_) | E::Parse(_) | E::Io(_) | E::Csv(_) => 2,
                _ => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "biphoton", version, about = "Simulate and analyse spectrally shaped entangled photon pairs")]
struct Cli {
    /// Seed for every random draw (overrides `seed` in [scenario]).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "output")]
    out: PathBuf,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Scenario file; defaults apply to everything it leaves out.
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Biphoton spectrum, temporal correlation and optional joint spectrum.
    Spdc(ConfigArg),
    /// Pixel-to-wavelength map and calibration fit.
    Calibrate(ConfigArg),
    /// Transmitted spectrum of a pixel window for grating and prism blur.
    Resolution(ConfigArg),
    /// Quantum and classical scans over the quadratic mask coefficient.
    DispersionScan(ConfigArg),
    /// Setup dispersion per grating shift from a series of classical scans.
    GvdSlope(ConfigArg),
    /// Interferometric autocorrelation scan and its spectrogram.
    Iac(ConfigArg),
    /// Cross-section and rate report with provenance.
    Rates(ConfigArg),
    /// Run the experiment named by `experiment` in [scenario].
    Run {
        config: PathBuf,
    },
}

fn load(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::parse("")?),
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (fixed, path) = match &cli.command {
        Command::Spdc(a) => (Some(Experiment::Spdc), a.config.as_deref()),
        Command::Calibrate(a) => (Some(Experiment::Calibrate), a.config.as_deref()),
        Command::Resolution(a) => (Some(Experiment::Resolution), a.config.as_deref()),
        Command::DispersionScan(a) => (Some(Experiment::DispersionScan), a.config.as_deref()),
        Command::GvdSlope(a) => (Some(Experiment::GvdSlope), a.config.as_deref()),
        Command::Iac(a) => (Some(Experiment::Iac), a.config.as_deref()),
        Command::Rates(a) => (Some(Experiment::Rates), a.config.as_deref()),
        Command::Run { config } => (None, Some(config.as_path())),
    };
    let cfg = load(path)?;
    let named = match cfg.string("scenario", "experiment") {
        Some(name) => Some(Experiment::from_name(&name).ok_or_else(|| {
            let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            scenario::field(
                &cfg,
                "scenario",
                "experiment",
                &format!("unknown experiment '{name}' (expected one of {})", known.join(", ")),
            )
        })?),
        None => None,
    };
    let experiment = match (fixed, named) {
        (Some(f), Some(n)) if f != n => {
            return Err(scenario::field(
                &cfg,
                "scenario",
                "experiment",
                &format!("scenario is for '{}' but the '{}' command was used", n.name(), f.name()),
            ));
        }
        (Some(f), _) => f,
        (None, Some(n)) => n,
        (None, None) => {
            return Err(scenario::field(&cfg, "scenario", "experiment", "run needs the experiment to perform"));
        }
    };
    let seed = match cli.seed {
        Some(s) => {
            // still mark the key as read
            cfg.u64("scenario", "seed")?;
            Some(s)
        }
        None => cfg.u64("scenario", "seed")?,
    };
    let name = cfg
        .string("scenario", "name")
        .unwrap_or_else(|| experiment.name().replace('-', "_"));
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(scenario::field(&cfg, "scenario", "name", "name may only use letters, digits, '_' and '-'"));
    }
    let job = experiments::plan(experiment, &cfg, seed)?;
    cfg.finish()?;
    let mut outputs = Outputs::new(&cli.out, &name)?;
    job(&mut outputs)?;
    let manifest = outputs.finish(experiment.name(), &cfg.sha256, seed)?;
    if !cli.quiet {
        match outputs.report() {
            Some(text) => print!("{text}"),
            None => {
                for item in outputs.summary_items() {
                    println!("{:<28} {:>18.9e} {}", item.key, item.value, item.unit);
                }
            }
        }
        for note in outputs.notes() {
            println!("note: {note}");
        }
        println!("manifest: {}", manifest.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
