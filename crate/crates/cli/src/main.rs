//! Scenario runner: builds preset markets, runs the
//! solve -> hedge -> simulate -> verify pipeline and emits CSV/JSON
//! artifacts with a content-hashed manifest.

mod config;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::ScenarioConfig;
use pipeline::{emit_report, run_scenario, RunFlags};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {detail}")]
    Config { path: String, detail: String },
    #[error("{0}")]
    Flag(String),
    #[error(transparent)]
    Engine(#[from] riskmin::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "riskmin", about = "Quadratic hedging on rating-switching jump-diffusion markets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write artifacts plus a manifest.
    Run(RunArgs),
    /// Parse a configuration and check the model assumptions.
    Validate { config: PathBuf },
    /// Preset registry commands.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
    /// Re-render the summary of an existing manifest.
    Report { manifest: PathBuf },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List the model and payment-stream families.
    List,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (also settable via RISKMIN_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the Monte Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Override grid node counts, e.g. 401 or 201x41.
    #[arg(long)]
    grid: Option<String>,
    /// Skip the PIDE stage (and everything that needs it).
    #[arg(long)]
    skip_pide: bool,
    /// Monte Carlo only: no solver, no hedge field.
    #[arg(long)]
    mc_only: bool,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = ScenarioConfig::load(&args.config)?;
            let grid = args
                .grid
                .as_deref()
                .map(parse_grid_override)
                .transpose()?;
            let flags = RunFlags {
                seed: args.seed,
                out_dir: args.out_dir,
                paths: args.paths,
                grid,
                skip_pide: args.skip_pide,
                mc_only: args.mc_only,
            };
            let scenario = args
                .config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into());
            let (manifest, dir) = run_scenario(&config, &flags, &scenario)?;
            let summary = emit_report(&manifest, &dir)?;
            print!("{summary}");
            Ok(if manifest.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Validate { config } => {
            let config = ScenarioConfig::load(&config)?;
            let (model, _) = riskmin::model::preset_model(&config.model.family, &config.model.params)?;
            let plan = riskmin::model::SamplePlan::default_for(&model, 1.0, &config.model.y0);
            let report = riskmin::model::validate_model(&model, &plan);
            for check in &report.checks {
                println!(
                    "{}: {} — {}",
                    check.name,
                    if check.passed { "pass" } else { "FAIL" },
                    check.detail
                );
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Presets { action } => match action {
            PresetsAction::List => {
                println!("model families:");
                for name in riskmin::model::preset_names() {
                    println!("  {name}");
                }
                println!("payment-stream families:");
                for name in riskmin::model::presets::dividend_names() {
                    println!("  {name}");
                }
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Report { manifest } => {
            let manifest = manifest::Manifest::load(&manifest)?;
            let text = manifest::render_summary(&manifest);
            print!("{text}");
            Ok(if manifest.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn parse_grid_override(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(['x', 'X'])
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Flag(format!("bad --grid value '{text}'")))
        })
        .collect()
}
