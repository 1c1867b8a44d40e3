//! `zass`: run, check and sweep adaptive Zassenhaus splitting experiments.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::SweepArgs;
use config::RunArgs;
use error::CliResult;

#[derive(Parser)]
#[command(name = "zass", version, about = "Adaptive Zassenhaus splitting for semiclassical Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration; writes steps, final state and summary.
    Run(RunArgs),
    /// Propagate with the dense reference oracle (small grids only).
    Reference(RunArgs),
    /// L² distance between two final-state files on the same grid.
    Compare { a: PathBuf, b: PathBuf },
    /// Cartesian sweep over tolerances, (epsilon, M) cells, defects and schemes.
    Sweep(SweepArgs),
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run(args) => {
            let cfg = args.resolve(&args.file()?, false)?;
            let s = commands::run(&cfg)?;
            println!(
                "accepted {} rejected {} exponentials {} final_norm {}",
                s.accepted, s.rejected, s.exponentials, s.final_norm
            );
            if let Some(e) = s.global_error {
                println!("global_error {e}");
            }
        }
        Command::Reference(args) => {
            let cfg = args.resolve(&args.file()?, true)?;
            let norm = commands::reference(&cfg)?;
            println!("norm {norm}");
        }
        Command::Compare { a, b } => {
            println!("{}", commands::compare(&a, &b)?);
        }
        Command::Sweep(args) => {
            let rows = commands::sweep(&args)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} cells, {} failed", rows.len(), failed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zass: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
