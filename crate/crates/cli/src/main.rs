//! `glpattern <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--plots]`
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver failure, 1 anything else
//! (e.g. an unwritable output directory). Thread count follows `RAYON_NUM_THREADS`.

mod artifacts;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use glpattern_core::config::load_config;
use glpattern_core::GlError;

use run::{Options, SolverFailure, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "glpattern", version, about = "Deformed roll patterns of the 2-D Ginzburg-Landau equation")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write PNG heatmaps of |A| and the phase.
    #[arg(long)]
    plots: bool,
}

const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<SolverFailure>().is_some() {
        return EXIT_SOLVER;
    }
    match err.chain().find_map(|e| e.downcast_ref::<GlError>()) {
        Some(
            GlError::SingularJacobian { .. }
            | GlError::NotConverged { .. }
            | GlError::BlowUp { .. }
            | GlError::AmplitudeCollapse { .. }
            | GlError::Consistency(_),
        ) => EXIT_SOLVER,
        Some(GlError::Io(_)) => 1,
        Some(_) => EXIT_INPUT,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match load_config(&cli.config)
        .with_context(|| format!("loading config {}", cli.config.display()))
    {
        Ok(mut c) => {
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            // a missing or unreadable config is an input problem too
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let opts = Options {
        out: cli.out.unwrap_or_else(|| cfg.output.clone()),
        plots: cli.plots,
    };
    match run::run(cli.subcommand, &cfg, &opts) {
        Ok(manifest) => {
            println!("{} done; manifest at {}", cli.subcommand.name(), manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
