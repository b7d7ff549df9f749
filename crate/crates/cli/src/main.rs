use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmlab::commands::{self, worker_pool};
use mmlab::reproduce::reproduce;
use mmlab::CliResult;

#[derive(Parser)]
#[command(name = "mmlab", version, about = "Minimax optimization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rerun a built-in figure experiment (or `all`).
    Reproduce {
        figure_id: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print generalization and expansivity bounds as CSV.
    Bounds {
        #[arg(long)]
        theorem: String,
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Coupled runs on neighboring datasets.
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Reproduce { figure_id, seed, out } => {
            for f in reproduce(&figure_id, seed, &out, &worker_pool()?)? {
                println!("{}", f.display());
            }
        }
        Command::Run { config } => {
            for f in commands::cmd_run(&config)? {
                println!("{}", f.display());
            }
        }
        Command::Bounds { theorem, params } => print!("{}", commands::cmd_bounds(&theorem, &params)?),
        Command::Stability { config } => {
            for f in commands::cmd_stability(&config, &worker_pool()?)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
