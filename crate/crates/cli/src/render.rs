//! ASCII rendering of trajectory dumps.
//!
//! One glyph per cell: uppercase letters mark agent starts, lowercase
//! letters cells the matching agent visited, digits the buttons, `*` cells
//! visited by more than one agent. The header lines carry the crash mask,
//! outcome and per-button touch annotations, so a healthy/crashed render
//! pair can be compared at a glance.

use std::fmt::Write as _;

use crashcoach_core::record::TrajectoryDump;

fn agent_glyph(i: usize) -> char {
    (b'a' + (i % 26) as u8) as char
}

fn button_glyph(i: usize) -> char {
    if i < 9 {
        (b'1' + i as u8) as char
    } else {
        '#'
    }
}

/// First step at which any agent stands on the button, if ever.
fn touch_step(dump: &TrajectoryDump, button: (usize, usize)) -> Option<usize> {
    dump.positions
        .iter()
        .position(|agents| agents.iter().any(|&p| p == button))
}

pub fn render_trajectory_ascii(dump: &TrajectoryDump) -> String {
    let config = &dump.config;
    let (w, h) = (config.width, config.height);
    let total: f64 = dump.rewards.iter().sum();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "grid {w}x{h} | steps {} | outcome: {} | return {total}",
        dump.executed.len(),
        if dump.success { "success" } else { "failure" },
    );

    let mask_line: Vec<String> = dump
        .mask
        .iter()
        .enumerate()
        .map(|(i, &crashed)| {
            format!(
                "{}={}",
                agent_glyph(i),
                if crashed { "CRASHED" } else { "ok" }
            )
        })
        .collect();
    let _ = writeln!(out, "agents: {}", mask_line.join(" "));

    let buttons: Vec<String> = config
        .button_positions
        .iter()
        .enumerate()
        .map(|(b, &(x, y))| match touch_step(dump, (x, y)) {
            Some(t) => format!("{} at ({x},{y}) touched@{}", button_glyph(b), t + 1),
            None => format!("{} at ({x},{y}) untouched", button_glyph(b)),
        })
        .collect();
    let _ = writeln!(out, "buttons: {}", buttons.join(" | "));
    let _ = writeln!(
        out,
        "legend: uppercase = start, lowercase = visited, * = visited by several"
    );

    // Paint in increasing precedence: paths, buttons, starts.
    let mut canvas = vec![vec!['.'; w]; h];
    let mut visitor: Vec<Vec<Option<usize>>> = vec![vec![None; w]; h];
    for agents in &dump.positions {
        for (i, &(x, y)) in agents.iter().enumerate() {
            match visitor[y][x] {
                None => {
                    visitor[y][x] = Some(i);
                    canvas[y][x] = agent_glyph(i);
                }
                Some(j) if j != i => canvas[y][x] = '*',
                _ => {}
            }
        }
    }
    for (b, &(x, y)) in config.button_positions.iter().enumerate() {
        canvas[y][x] = button_glyph(b);
    }
    for (i, &(x, y)) in config.agent_starts.iter().enumerate() {
        canvas[y][x] = agent_glyph(i).to_ascii_uppercase();
    }

    for row in &canvas {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}
