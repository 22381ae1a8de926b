//! Implementations behind the `crashcoach` subcommands.
//!
//! The training-log CSV uses the deterministic zero time source so that two
//! invocations with identical arguments and files produce byte-identical
//! artifacts; real elapsed time is reported on stderr only.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crashcoach_core::crash::{CrashBehavior, CrashMask};
use crashcoach_core::trainer::{
    evaluate, record_trajectory, run_training, test_matrix, EnvSpec, NoTime, RunConfig,
    SweepCell, TestMatrixCell, TrainOutput,
};
use crashcoach_core::CoreError;

use crate::config::{parse_config, serialize_config};
use crate::csv_io::{format_test_matrix, write_sweep, write_test_matrix, write_training_log};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::render::render_trajectory_ascii;
use crate::trajectory::{load_trajectory, save_trajectory};
use crate::{CliError, Result};

fn located(path: &Path, err: CliError) -> CliError {
    match err {
        CliError::Parse { line, detail } => CliError::Parse {
            line,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    }
}

fn persist_run(out_dir: &Path, config: &RunConfig, run: &TrainOutput) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_training_log(&run.log, &out_dir.join("training_log.csv"))?;
    save_checkpoint(&run.params, &out_dir.join("checkpoint.bin"))?;
    fs::write(out_dir.join("run.cfg"), serialize_config(config))?;

    // Demonstration trajectories: greedy rollouts with no crash and with
    // agent 0 frozen, both replayable through `render`.
    let n = run.params.dims.n_agents;
    let healthy = record_trajectory(
        &config.env,
        &run.params,
        &CrashMask::none(n),
        config.behavior,
        config.seed,
    )?;
    save_trajectory(&healthy, &out_dir.join("trajectory_nocrash.json"))?;
    let mut bits = vec![false; n];
    bits[0] = true;
    let crashed = record_trajectory(
        &config.env,
        &run.params,
        &CrashMask::new(bits),
        CrashBehavior::Freeze,
        config.seed,
    )?;
    save_trajectory(&crashed, &out_dir.join("trajectory_crash0.json"))?;
    Ok(())
}

pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut config = parse_config(config_path).map_err(|e| located(config_path, e))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.out_dir = Some(out.display().to_string());
    }
    let out_dir = PathBuf::from(
        config
            .out_dir
            .clone()
            .unwrap_or_else(|| format!("runs/train-seed{}", config.seed)),
    );

    let started = Instant::now();
    match run_training(&config, &mut NoTime) {
        Ok(run) => {
            persist_run(&out_dir, &config, &run)?;
            eprintln!(
                "trained {} episodes / {} env steps in {:.1?}; artifacts in {}",
                run.episodes,
                run.env_steps,
                started.elapsed(),
                out_dir.display()
            );
            if let Some(last) = run.log.last() {
                eprintln!(
                    "final round {}: alpha {:.4}, e {:.3}, loss {:.5}",
                    last.round, last.alpha, last.e, last.loss
                );
            }
            Ok(())
        }
        Err(abort) => {
            // Persist the last good state before surfacing the failure.
            if let Some(last_good) = &abort.last_good {
                persist_run(&out_dir, &config, last_good)?;
                eprintln!(
                    "aborted after {} episodes; last good checkpoint persisted in {}",
                    last_good.episodes,
                    out_dir.display()
                );
            }
            Err(CliError::Core(abort.error))
        }
    }
}

fn check_rates(rates: &[f64]) -> Result<()> {
    for &rate in rates {
        if !(0.0..=1.0).contains(&rate) {
            return Err(CliError::Core(CoreError::InvalidParameter {
                name: "rates",
                detail: format!("crash rates must be in [0, 1], got {rate}"),
            }));
        }
    }
    Ok(())
}

/// Resolve the environment for an evaluation: an explicit config, or the
/// `run.cfg` persisted next to the checkpoint, or the desk default.
fn eval_env(config: Option<&Path>, checkpoint: &Path) -> Result<(EnvSpec, CrashBehavior)> {
    let path = match config {
        Some(path) => Some(path.to_path_buf()),
        None => {
            let sibling = checkpoint.with_file_name("run.cfg");
            sibling.exists().then_some(sibling)
        }
    };
    match path {
        Some(path) => {
            let config = parse_config(&path).map_err(|e| located(&path, e))?;
            Ok((config.env, config.behavior))
        }
        None => Ok((EnvSpec::Desk6x6, CrashBehavior::Freeze)),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    checkpoint_path: &Path,
    config: Option<&Path>,
    rates: &[f64],
    episodes: usize,
    behavior: Option<CrashBehavior>,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    check_rates(rates)?;
    let params = load_checkpoint(checkpoint_path)?;
    let (env, config_behavior) = eval_env(config, checkpoint_path)?;
    let behavior = behavior.unwrap_or(config_behavior);
    let cells = test_matrix(
        &env,
        std::slice::from_ref(&params),
        rates,
        episodes,
        behavior,
        seed,
    )?;
    print!("{}", format_test_matrix(&cells));
    if let Some(out) = out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_test_matrix(&cells, out)?;
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

pub fn cmd_render(trajectory_path: &Path) -> Result<()> {
    let dump = load_trajectory(trajectory_path)?;
    dump.verify_replay()?;
    print!("{}", render_trajectory_ascii(&dump));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    config_path: &Path,
    betas: &[f64],
    rhos: &[f64],
    seeds: &[u64],
    rates: &[f64],
    episodes: usize,
    eval_seed: u64,
    out_dir: &Path,
) -> Result<()> {
    check_rates(rates)?;
    if betas.is_empty() || rhos.is_empty() || seeds.is_empty() {
        return Err(CliError::Core(CoreError::InvalidParameter {
            name: "sweep grid",
            detail: "need at least one beta, one rho and one seed".into(),
        }));
    }
    let base = parse_config(config_path).map_err(|e| located(config_path, e))?;
    fs::create_dir_all(out_dir)?;

    let alpha_init = match base.coach {
        crashcoach_core::coach::CoachStrategy::Adaptive { alpha_init, .. } => alpha_init,
        _ => 0.0,
    };

    let mut rollup: Vec<SweepCell> = Vec::new();
    for &beta in betas {
        for &rho in rhos {
            let cell_dir = out_dir.join(format!("beta{beta}_rho{rho}"));
            fs::create_dir_all(&cell_dir)?;
            let mut checkpoints = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let mut config = base.clone();
                config.coach = crashcoach_core::coach::CoachStrategy::Adaptive {
                    beta,
                    rho,
                    alpha_init,
                };
                config.seed = seed;
                config.out_dir = None;
                let started = Instant::now();
                let run = run_training(&config, &mut NoTime).map_err(|abort| {
                    CliError::Core(abort.error)
                })?;
                let seed_dir = cell_dir.join(format!("seed{seed}"));
                persist_run(&seed_dir, &config, &run)?;
                eprintln!(
                    "cell beta={beta} rho={rho} seed={seed}: {} steps in {:.1?}",
                    run.env_steps,
                    started.elapsed()
                );
                checkpoints.push(run.params);
            }
            let cells: Vec<TestMatrixCell> = test_matrix(
                &base.env,
                &checkpoints,
                rates,
                episodes,
                base.behavior,
                eval_seed,
            )?;
            write_test_matrix(&cells, &cell_dir.join("matrix.csv"))?;
            rollup.push(SweepCell { beta, rho, cells });
        }
    }
    write_sweep(&rollup, &out_dir.join("sweep.csv"))?;
    eprintln!("wrote {}", out_dir.join("sweep.csv").display());

    // Echo the winning cell at the highest rate for convenience.
    if let Some(&rate) = rates.last() {
        if let Some(best) = rollup.iter().max_by(|a, b| {
            let sa = a.cells.iter().find(|c| c.crash_rate == rate);
            let sb = b.cells.iter().find(|c| c.crash_rate == rate);
            sa.map(|c| c.success_mean)
                .partial_cmp(&sb.map(|c| c.success_mean))
                .unwrap_or(std::cmp::Ordering::Equal)
        }) {
            eprintln!(
                "best at rate {rate}: beta={} rho={}",
                best.beta, best.rho
            );
        }
    }
    Ok(())
}

pub fn evaluate_once(
    env: &EnvSpec,
    checkpoint_path: &Path,
    rate: f64,
    behavior: CrashBehavior,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let params = load_checkpoint(checkpoint_path)?;
    Ok(evaluate(env, &params, rate, behavior, episodes, seed)?.success_rate)
}
