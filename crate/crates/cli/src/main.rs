use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsvgd_cli::config::{crescent_modes, TargetId};
use gsvgd_cli::{load_config, run_experiment, CliError};

#[derive(Parser)]
#[command(
    name = "gsvgd",
    version,
    about = "Kernelized particle samplers for MCMC dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trace.csv, snapshots/ and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse a config and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the mode centers used for occupancy on a target.
    Modes {
        #[arg(long, value_parser = parse_target)]
        target: TargetId,
    },
}

fn parse_target(s: &str) -> Result<TargetId, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(out) = out {
                cfg.run.output_dir = out;
            }
            if let Some(seed) = seed {
                cfg.run.seed = seed;
                if let Some(data) = cfg.data.as_mut() {
                    data.seed = None;
                }
                cfg.resolve()?;
            }
            let summary = run_experiment(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary.last).expect("metrics serialize")
            );
        }
        Command::Validate { config } => println!("{}", load_config(&config)?.to_json()),
        Command::Modes { target } => match target {
            TargetId::TriCrescent => {
                println!(
                    "{}",
                    serde_json::to_string(&crescent_modes()).expect("modes serialize")
                )
            }
            other => {
                return Err(CliError::Config {
                    key: "target".into(),
                    message: format!(
                        "no mode search defined for {other:?}; list centers in trace.modes"
                    ),
                })
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
