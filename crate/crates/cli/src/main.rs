mod commands;
mod manifest;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rydberg_sps::{Config, ErrorKind};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

/// Model, simulate and analyze a Rydberg-ensemble single-photon source.
#[derive(Debug, Parser)]
#[command(name = "rydsps", version)]
struct Cli {
    /// TOML run configuration. Bare names are also looked up in the
    /// config directory.
    #[arg(long, global = true, env = "RYDSPS_CONFIG")]
    config: Option<PathBuf>,

    /// Directory for output files and the run manifest.
    #[arg(long, global = true, default_value = "rydsps-out")]
    out: PathBuf,

    /// Print a one-line JSON summary on stdout instead of the report.
    #[arg(long, global = true)]
    json_summary: bool,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Write, storage and retrieval efficiencies from the atomic model.
    Theory,
    /// Monte Carlo time tags for an HBT or HOM setup.
    Simulate(SimulateArgs),
    /// g²(0) or HOM visibility from time-tag files.
    Analyze(AnalyzeArgs),
    /// Contaminant parameters from per-pulse success rates.
    Fit(FitArgs),
    /// Single-mode efficiency, fidelity and brightness of source rows.
    Metrics(MetricsArgs),
    /// Plot-ready data for one of the figures.
    Reproduce(ReproduceArgs),
    /// Re-run the command recorded in a manifest with its stored config.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyArg {
    Hbt,
    Hom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationArg {
    Parallel,
    Perpendicular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TopologyArg::Hbt)]
    pub topology: TopologyArg,
    #[arg(long, value_enum, default_value_t = PolarizationArg::Parallel)]
    pub polarization: PolarizationArg,
    /// Overrides the pulse count of the config.
    #[arg(long)]
    pub pulses: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Reset the contaminant state every this many pulses.
    #[arg(long)]
    pub train_length: Option<u64>,
    /// HOM delay line in seconds; defaults to one pulse period.
    #[arg(long)]
    pub hom_delay: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    /// Time tags (CSV or binary); the parallel run for HOM.
    #[arg(long)]
    pub tags: PathBuf,
    /// Perpendicular-polarization run; switches to HOM analysis.
    #[arg(long)]
    pub perp: Option<PathBuf>,
    /// Pulses in the run; defaults to the config.
    #[arg(long)]
    pub pulses: Option<u64>,
    /// g²(0) used when inferring the mode overlap.
    #[arg(long, default_value_t = 0.0)]
    pub g2: f64,
    #[arg(long, default_value_t = 20)]
    pub bin_ns: u64,
    #[arg(long, default_value_t = 10)]
    pub side_min: u32,
    #[arg(long, default_value_t = 50)]
    pub side_max: u32,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV with `pulse_index,success_rate,stderr`.
    #[arg(long)]
    pub data: PathBuf,
    /// Pulse period in seconds; defaults to the config.
    #[arg(long)]
    pub t_p: Option<f64>,
    #[arg(long)]
    pub unweighted: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    /// CSV with `label,R_Hz,duty,P,V,g2`; defaults to the bundled table.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReproduceArgs {
    /// fig2, fig3, fig4 or fig5.
    pub figure: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Overrides the default Monte Carlo pulse count.
    #[arg(long)]
    pub pulses: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// What a command produced.
pub struct Outcome {
    pub summary: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub report: String,
}

const CONFIG_DIR_ENV: &str = "RYDSPS_CONFIG_DIR";

fn resolve_config(path: Option<&PathBuf>) -> anyhow::Result<Config> {
    let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
    let Some(path) = path else {
        if let Some(default) = dir.map(|d| d.join("default.toml")).filter(|p| p.exists()) {
            log::info!("using {}", default.display());
            return Ok(rydberg_sps::load_config(default)?);
        }
        return Ok(Config::reported());
    };
    if !path.exists() && path.components().count() == 1 {
        if let Some(dir) = dir {
            for cand in [dir.join(path), dir.join(path).with_extension("toml")] {
                if cand.exists() {
                    return Ok(rydberg_sps::load_config(cand)?);
                }
            }
        }
    }
    Ok(rydberg_sps::load_config(path)?)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rydberg_sps::Error>() {
            return match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Numerical => 2,
                ErrorKind::Io => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    let (command, config) = match &cli.command {
        Command::Replay(r) => {
            let m = RunManifest::read(&r.manifest)?;
            let config = rydberg_sps::config::parse_config(&m.config_toml)
                .context("config stored in manifest")?;
            (m.invocation, config)
        }
        other => (other.clone(), resolve_config(cli.config.as_ref())?),
    };
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let outcome = commands::dispatch(&command, &config, &cli.out)?;
    let manifest = RunManifest::new(&command, &config, &outcome, &cli.out, started.elapsed().as_secs_f64());
    manifest.write(&cli.out.join("manifest.json"))?;
    if cli.json_summary {
        println!("{}", serde_json::to_string(&outcome.summary)?);
    } else {
        print!("{}", outcome.report);
        println!("outputs written to {}", cli.out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
