//! `crashcoach`: train, evaluate, render and sweep crash-robust cooperative
//! Q-learning runs on the buttons grid world.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crashcoach_cli::commands;
use crashcoach_core::crash::CrashBehavior;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BehaviorArg {
    /// Crashed agents execute the no-op action every step.
    Freeze,
    /// Crashed agents take uniform random actions.
    Random,
}

impl From<BehaviorArg> for CrashBehavior {
    fn from(b: BehaviorArg) -> Self {
        match b {
            BehaviorArg::Freeze => CrashBehavior::Freeze,
            BehaviorArg::Random => CrashBehavior::Random,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "crashcoach",
    version,
    about = "Coach-scheduled crash-robust cooperative multi-agent Q-learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write log, checkpoint and demo trajectories.
    Train {
        /// Run config file (key = value sections; empty file = defaults).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint at one or more crash rates.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run config naming the environment; defaults to the run.cfg next
        /// to the checkpoint, then to the desk 6x6 task.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated crash rates in [0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.05, 0.10])]
        rates: Vec<f64>,
        /// Evaluation episodes per rate.
        #[arg(long, default_value_t = 128)]
        episodes: usize,
        /// Crash behavior during evaluation (default: from the config).
        #[arg(long, value_enum)]
        behavior: Option<BehaviorArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay-verify a trajectory dump and print its ASCII render.
    Render {
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Grid-search the adaptive coach's threshold and step size.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.60, 0.65, 0.70, 0.75])]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.001, 0.003, 0.005, 0.015])]
        rhos: Vec<f64>,
        /// Training seeds, held fixed across grid cells.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.05, 0.10])]
        rates: Vec<f64>,
        #[arg(long, default_value_t = 128)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        eval_seed: u64,
        /// Output directory: one subdirectory per grid cell plus sweep.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, seed, out } => commands::cmd_train(&config, seed, out),
        Command::Eval {
            checkpoint,
            config,
            rates,
            episodes,
            behavior,
            seed,
            out,
        } => commands::cmd_eval(
            &checkpoint,
            config.as_deref(),
            &rates,
            episodes,
            behavior.map(CrashBehavior::from),
            seed,
            out.as_deref(),
        ),
        Command::Render { trajectory } => commands::cmd_render(&trajectory),
        Command::Sweep {
            config,
            betas,
            rhos,
            seeds,
            rates,
            episodes,
            eval_seed,
            out,
        } => commands::cmd_sweep(
            &config, &betas, &rhos, &seeds, &rates, episodes, eval_seed, &out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
