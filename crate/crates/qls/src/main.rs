use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qls::cli;
use qls::config::RunConfig;

/// Mountain-pass ground states of 2D quasilinear Schrödinger equations.
#[derive(Debug, Parser)]
#[command(name = "qls", version, about)]
struct Cli {
    /// Run configuration file (flat key = value lines); defaults apply
    /// for every key that is not set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed (overrides solver.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the mountain-pass solver and the post-solve verification.
    Solve,
    /// Minimize the constrained quotient S_p and the derived C_p threshold.
    Sp,
    /// Audit the structural hypotheses H1-H6 of the configured model.
    Check,
    /// Cross-validate a prior solve against the radial shooting oracle.
    Oracle,
    /// Run sp, check, solve and (for the constant-V model) oracle in order.
    VerifyAll,
}

fn main() -> ExitCode {
    let args = Cli::parse();

    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(cli::EXIT_IO as u8);
            }
        },
        None => String::new(),
    };
    let mut cfg = match RunConfig::parse(&text) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(cli::EXIT_VALIDATION as u8);
        }
    };
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("configuration error: {e}");
        return ExitCode::from(cli::EXIT_VALIDATION as u8);
    }

    let code = match args.command {
        Command::Solve => cli::cmd_solve(&cfg),
        Command::Sp => cli::cmd_sp(&cfg),
        Command::Check => cli::cmd_check(&cfg),
        Command::Oracle => cli::cmd_oracle(&cfg),
        Command::VerifyAll => cli::cmd_verify_all(&cfg),
    };
    ExitCode::from(code as u8)
}
