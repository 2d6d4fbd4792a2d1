use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optliq::cli::{cmd_all, cmd_simulate, cmd_solve, cmd_tables, Overrides};

/// Optimal liquidation: solver, policy tables, and Monte Carlo validation.
#[derive(Parser)]
#[command(name = "optliq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the value/policy grid and write solution.{bin,csv}.
    Solve {
        /// Flat `name = value` config file; defaults used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the time-step size.
        #[arg(long)]
        dt: Option<f64>,
        /// Drop the market-making channel (LO/MO-only strategy).
        #[arg(long)]
        no_mm: bool,
    },
    /// Emit report tables and figure data from a solved policy.
    Tables {
        /// Serialized solution (solution.bin from `solve`).
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the strategy comparison by Monte Carlo.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve both strategy variants, emit all tables, and simulate.
    All {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        n_paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            config,
            out,
            dt,
            no_mm,
        } => cmd_solve(
            config.as_deref(),
            &out,
            &Overrides {
                dt,
                no_mm,
                ..Default::default()
            },
        ),
        Command::Tables { policy, out } => cmd_tables(&policy, &out),
        Command::Simulate {
            config,
            policy,
            out,
            n_paths,
            seed,
        } => cmd_simulate(
            config.as_deref(),
            &policy,
            &out,
            &Overrides {
                n_paths,
                seed,
                ..Default::default()
            },
        ),
        Command::All {
            config,
            out,
            dt,
            n_paths,
            seed,
        } => cmd_all(
            config.as_deref(),
            &out,
            &Overrides {
                dt,
                n_paths,
                seed,
                no_mm: false,
            },
        ),
    };
    match result {
        Ok(manifest) => {
            println!(
                "wrote {} file(s) in {:.2}s",
                manifest.outputs.len(),
                manifest.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
