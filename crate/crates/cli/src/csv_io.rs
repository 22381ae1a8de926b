//! CSV schemas: the per-round training log (lossless round-trip), the
//! test-matrix table and the sweep roll-up.

use std::fs;
use std::path::Path;

use crashcoach_core::record::TrainingLogRow;
use crashcoach_core::trainer::{SweepCell, TestMatrixCell};

use crate::{CliError, Result};

pub const TRAINING_LOG_HEADER: &str = "round,env_steps,alpha,e,loss,epsilon,wall_ms";
pub const MATRIX_HEADER: &str =
    "crash_rate,seeds,episodes,success_mean,success_std,return_mean,return_std";
pub const SWEEP_HEADER: &str =
    "beta,rho,crash_rate,seeds,episodes,success_mean,success_std,return_mean,return_std";

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_training_log(rows: &[TrainingLogRow]) -> String {
    let mut out = String::from(TRAINING_LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.round,
            r.env_steps,
            full(r.alpha),
            full(r.e),
            full(r.loss),
            full(r.epsilon),
            r.wall_ms
        ));
    }
    out
}

pub fn write_training_log(rows: &[TrainingLogRow], path: &Path) -> Result<()> {
    fs::write(path, format_training_log(rows))?;
    Ok(())
}

pub fn parse_training_log(text: &str) -> Result<Vec<TrainingLogRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRAINING_LOG_HEADER => {}
        Some((_, header)) => {
            return Err(CliError::Parse {
                line: 1,
                detail: format!("bad header `{header}`"),
            })
        }
        None => {
            return Err(CliError::Parse {
                line: 1,
                detail: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::Parse {
                line: lineno,
                detail: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| CliError::Parse {
            line: lineno,
            detail: format!("unparseable {what}"),
        };
        rows.push(TrainingLogRow {
            round: fields[0].parse().map_err(|_| bad("round"))?,
            env_steps: fields[1].parse().map_err(|_| bad("env_steps"))?,
            alpha: fields[2].parse().map_err(|_| bad("alpha"))?,
            e: fields[3].parse().map_err(|_| bad("e"))?,
            loss: fields[4].parse().map_err(|_| bad("loss"))?,
            epsilon: fields[5].parse().map_err(|_| bad("epsilon"))?,
            wall_ms: fields[6].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(rows)
}

pub fn read_training_log(path: &Path) -> Result<Vec<TrainingLogRow>> {
    parse_training_log(&fs::read_to_string(path)?)
}

fn matrix_row(cell: &TestMatrixCell) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        cell.crash_rate,
        cell.per_seed_success.len(),
        cell.episodes,
        cell.success_mean,
        cell.success_std,
        cell.return_mean,
        cell.return_std
    )
}

pub fn format_test_matrix(cells: &[TestMatrixCell]) -> String {
    let mut out = String::from(MATRIX_HEADER);
    out.push('\n');
    for cell in cells {
        out.push_str(&matrix_row(cell));
        out.push('\n');
    }
    out
}

pub fn write_test_matrix(cells: &[TestMatrixCell], path: &Path) -> Result<()> {
    fs::write(path, format_test_matrix(cells))?;
    Ok(())
}

pub fn format_sweep(cells: &[SweepCell]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for sweep_cell in cells {
        for cell in &sweep_cell.cells {
            out.push_str(&format!(
                "{},{},{}\n",
                sweep_cell.beta,
                sweep_cell.rho,
                matrix_row(cell)
            ));
        }
    }
    out
}

pub fn write_sweep(cells: &[SweepCell], path: &Path) -> Result<()> {
    fs::write(path, format_sweep(cells))?;
    Ok(())
}
