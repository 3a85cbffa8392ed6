use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use energy_tails::experiment::{self, ExperimentConfig, RunOptions, Task};
use energy_tails::{linalg, Error};

#[derive(Parser)]
#[command(name = "energy-tails", version, about = "Exact energy distributions and tail-bound checks for small spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the Hamiltonian and export it.
    Build(Common),
    /// Energy distribution of the state as CSV.
    Distribution(Common),
    /// Central moments of the energy.
    Moments(Common),
    /// Count qualifying tuples and compare with the closed-form bound.
    Combi(Common),
    /// Certify exponential decay of correlations.
    Certify(Common),
    /// Check a tail or moment bound over a grid.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `out`, else `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    /// Map each explicit term h to (h + |h| I) / (2 |h|) before validation.
    #[arg(long)]
    shift_to_psd: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::TheoremViolation { .. } => 3,
        Error::Eigensolver | Error::Inconsistent(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Build(c) => (Task::Build, c),
        Command::Distribution(c) => (Task::Distribution, c),
        Command::Moments(c) => (Task::Moments, c),
        Command::Combi(c) => (Task::Combi, c),
        Command::Certify(c) => (Task::Certify, c),
        Command::Verify(c) => (Task::Verify, c),
    };
    linalg::use_sequential_kernels();
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = ExperimentConfig::load(&common.config).and_then(|cfg| {
        let opts = RunOptions {
            seed: common.seed,
            shift_to_psd: common.shift_to_psd,
            out_dir: common.out.clone(),
        };
        experiment::run(&cfg, task, &opts)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
