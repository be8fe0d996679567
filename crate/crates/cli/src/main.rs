use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use mlo_cli::config::{resolve_output_dir, OUTPUT_ENV};
use mlo_cli::{analyze, load_manifest, parse_config, report, run_campaign};

#[derive(Parser)]
#[command(name = "mlo", version, about = "Meta-learned surrogate optimization on dynamic benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Dimensions 4 and 6, 5 seeds, 10 environments.
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and analyze it.
    Run {
        /// Config file, inline JSON, or a previous manifest.
        #[arg(long)]
        config: String,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Output directory; overrides the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a summary of a finished campaign.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Recompute the tables of a campaign from its stored traces.
    Analyze {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            preset,
            parallelism,
            out,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(Preset::Desk) = preset {
                cfg.apply_desk_preset();
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            resolve_output_dir(&mut cfg);
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            log::info!(
                "campaign in {} (override with {OUTPUT_ENV} or --out)",
                cfg.output_dir.display()
            );
            let outcome = run_campaign(&cfg)?;
            println!(
                "{} cells run, {} reused, {} failed",
                outcome.ran,
                outcome.reused,
                outcome.failed.len()
            );
            for f in &outcome.failed {
                println!("failed: {f}");
            }
            print!("{}", report(&cfg.output_dir)?);
            Ok(if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { dir } => {
            print!("{}", report(&dir)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { dir } => {
            let manifest = load_manifest(&dir)?;
            analyze(&dir, &manifest.config)?;
            println!("tables written to {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
