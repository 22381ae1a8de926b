//! Plain-text run configs: `key = value` lines grouped into `[env]`,
//! `[coach]`, `[learner]` and `[trainer]` sections.
//!
//! Every key has a documented default (an empty file is the desk-scale 6x6
//! preset); unknown keys, type errors and range violations are rejected with
//! the offending key and line. A serialized config re-parses to an equal
//! `RunConfig`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crashcoach_core::coach::CoachStrategy;
use crashcoach_core::crash::CrashBehavior;
use crashcoach_core::gridworld::GridButtonsConfig;
use crashcoach_core::learner::{LearnerConfig, MixerKind};
use crashcoach_core::trainer::{EnvSpec, RunConfig};
use crashcoach_core::CoreError;

use crate::{CliError, Result};

#[derive(Debug, Default)]
struct Section {
    /// Unconsumed key -> (value, line); keys are removed as they parse.
    entries: BTreeMap<String, (String, usize)>,
    /// Every key ever seen -> line, kept for error attribution.
    lines: BTreeMap<String, usize>,
    header_line: usize,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some((raw, line)) => raw.parse().map_err(|_| CliError::Parse {
                line,
                detail: format!("key `{key}`: cannot parse `{raw}`"),
            }),
        }
    }

    /// Line to blame when a later range check rejects `key`.
    fn line_of(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    fn reject_unknown(&self, section: &str) -> Result<()> {
        if let Some((key, &(_, line))) = self.entries.iter().min_by_key(|(_, &(_, line))| line) {
            return Err(CliError::Parse {
                line,
                detail: format!("unknown key `{key}` in [{section}]"),
            });
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "env" | "coach" | "learner" | "trainer") {
                return Err(CliError::Parse {
                    line: line_no,
                    detail: format!("unknown section `[{name}]`"),
                });
            }
            let entry = sections.entry(name.clone()).or_default();
            entry.header_line = line_no;
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Parse {
                line: line_no,
                detail: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(section) = &current else {
            return Err(CliError::Parse {
                line: line_no,
                detail: format!("key `{key}` before any [section]"),
            });
        };
        let sec = sections.get_mut(section).unwrap();
        if sec.entries.insert(key.clone(), (value, line_no)).is_some() {
            return Err(CliError::Parse {
                line: line_no,
                detail: format!("duplicate key `{key}`"),
            });
        }
        sec.lines.insert(key, line_no);
    }
    Ok(sections)
}

fn parse_positions(raw: &str, line: usize) -> Result<Vec<(usize, usize)>> {
    let bad = |detail: String| CliError::Parse { line, detail };
    raw.split(';')
        .map(|item| {
            let item = item.trim();
            let inner = item
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| bad(format!("expected `(x,y)`, got `{item}`")))?;
            let (x, y) = inner
                .split_once(',')
                .ok_or_else(|| bad(format!("expected `(x,y)`, got `{item}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(format!("bad coordinate `{s}`")))
            };
            Ok((parse(x)?, parse(y)?))
        })
        .collect()
}

fn format_positions(positions: &[(usize, usize)]) -> String {
    positions
        .iter()
        .map(|&(x, y)| format!("({x},{y})"))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_env(section: &mut Section) -> Result<EnvSpec> {
    let kind = section.parse::<String>("kind", "desk6x6".into())?;
    match kind.as_str() {
        "desk6x6" => Ok(EnvSpec::Desk6x6),
        "paper10x10" => Ok(EnvSpec::Paper10x10),
        "parametric" => Ok(EnvSpec::Parametric {
            n_agents: section.parse("n_agents", 8)?,
            n_buttons: section.parse("n_buttons", 4)?,
            width: section.parse("width", 8)?,
            height: section.parse("height", 8)?,
            max_steps: section.parse("max_steps", 30)?,
            layout_seed: section.parse("layout_seed", 7)?,
        }),
        "custom" => {
            let defaults = GridButtonsConfig::desk_layout();
            let starts = match section.take("agent_starts") {
                Some((raw, line)) => parse_positions(&raw, line)?,
                None => defaults.agent_starts.clone(),
            };
            let buttons = match section.take("button_positions") {
                Some((raw, line)) => parse_positions(&raw, line)?,
                None => defaults.button_positions.clone(),
            };
            Ok(EnvSpec::Custom(GridButtonsConfig {
                width: section.parse("width", defaults.width)?,
                height: section.parse("height", defaults.height)?,
                agent_starts: starts,
                button_positions: buttons,
                max_steps: section.parse("max_steps", defaults.max_steps)?,
                step_reward: section.parse("step_reward", defaults.step_reward)?,
                button_reward: section.parse("button_reward", defaults.button_reward)?,
                discount: section.parse("discount", defaults.discount)?,
            }))
        }
        other => {
            let line = section.header_line;
            Err(CliError::Parse {
                line,
                detail: format!(
                    "key `kind`: expected desk6x6 | paper10x10 | parametric | custom, got `{other}`"
                ),
            })
        }
    }
}

fn parse_coach(section: &mut Section) -> Result<CoachStrategy> {
    let strategy = section.parse::<String>("strategy", "adaptive".into())?;
    match strategy.as_str() {
        "fixed" => Ok(CoachStrategy::Fixed {
            alpha: section.parse("alpha", 0.0)?,
        }),
        "curriculum" => Ok(CoachStrategy::Curriculum {
            delta_alpha: section.parse("delta_alpha", 0.001)?,
            alpha_max: section.parse("alpha_max", 0.1)?,
        }),
        "adaptive" => Ok(CoachStrategy::Adaptive {
            beta: section.parse("beta", 0.75)?,
            rho: section.parse("rho", 0.01)?,
            alpha_init: section.parse("alpha_init", 0.0)?,
        }),
        other => Err(CliError::Parse {
            line: section.header_line,
            detail: format!("key `strategy`: expected fixed | curriculum | adaptive, got `{other}`"),
        }),
    }
}

fn parse_mixer(section: &mut Section) -> Result<MixerKind> {
    let raw = section.parse::<String>("mixer", "qmix".into())?;
    match raw.as_str() {
        "qmix" => Ok(MixerKind::QmixMono),
        "vdn" => Ok(MixerKind::VdnSum),
        other => Err(CliError::Parse {
            line: section.line_of("mixer").unwrap_or(section.header_line),
            detail: format!("key `mixer`: expected qmix | vdn, got `{other}`"),
        }),
    }
}

fn parse_behavior(section: &mut Section) -> Result<CrashBehavior> {
    let raw = section.parse::<String>("behavior", "freeze".into())?;
    match raw.as_str() {
        "freeze" => Ok(CrashBehavior::Freeze),
        "random" => Ok(CrashBehavior::Random),
        other => Err(CliError::Parse {
            line: section.line_of("behavior").unwrap_or(section.header_line),
            detail: format!("key `behavior`: expected freeze | random, got `{other}`"),
        }),
    }
}

/// Map a validation failure back to the config line that set the value.
fn blame(err: CoreError, sections: &BTreeMap<String, Section>) -> CliError {
    if let CoreError::InvalidParameter { name, .. } = &err {
        for section in sections.values() {
            if let Some(line) = section.line_of(name) {
                return CliError::Parse {
                    line,
                    detail: format!("key `{name}`: {err}"),
                };
            }
        }
    }
    CliError::Core(err)
}

pub fn parse_config_text(text: &str) -> Result<RunConfig> {
    let mut sections = split_sections(text)?;
    let defaults = LearnerConfig::default();
    let trainer_defaults = RunConfig::default();

    let mut env_section = sections.remove("env").unwrap_or_default();
    let env = parse_env(&mut env_section)?;
    env_section.reject_unknown("env")?;

    let mut coach_section = sections.remove("coach").unwrap_or_default();
    let coach = parse_coach(&mut coach_section)?;
    coach_section.reject_unknown("coach")?;

    let mut learner_section = sections.remove("learner").unwrap_or_default();
    let mixer = parse_mixer(&mut learner_section)?;
    let learner = LearnerConfig {
        hidden: learner_section.parse("hidden", defaults.hidden)?,
        embed: learner_section.parse("embed", defaults.embed)?,
        mixer,
        learning_rate: learner_section.parse("learning_rate", defaults.learning_rate)?,
        rms_decay: learner_section.parse("rms_decay", defaults.rms_decay)?,
        rms_eps: learner_section.parse("rms_eps", defaults.rms_eps)?,
        buffer_capacity: learner_section.parse("buffer_capacity", defaults.buffer_capacity)?,
        batch_episodes: learner_section.parse("batch_episodes", defaults.batch_episodes)?,
        epsilon_start: learner_section.parse("epsilon_start", defaults.epsilon_start)?,
        epsilon_end: learner_section.parse("epsilon_end", defaults.epsilon_end)?,
        epsilon_anneal_frac: learner_section
            .parse("epsilon_anneal_frac", defaults.epsilon_anneal_frac)?,
        target_period: learner_section.parse("target_period", defaults.target_period)?,
        include_prev_action: learner_section
            .parse("include_prev_action", defaults.include_prev_action)?,
        mask_crashed_in_loss: learner_section
            .parse("mask_crashed_in_loss", defaults.mask_crashed_in_loss)?,
    };
    learner_section.reject_unknown("learner")?;

    let mut trainer_section = sections.remove("trainer").unwrap_or_default();
    let behavior = parse_behavior(&mut trainer_section)?;
    let out_dir = trainer_section.take("out_dir").map(|(v, _)| v);
    let config = RunConfig {
        env,
        coach,
        learner,
        behavior,
        resample: trainer_section.parse("resample", trainer_defaults.resample)?,
        resample_max_tries: trainer_section
            .parse("resample_max_tries", trainer_defaults.resample_max_tries)?,
        total_steps: trainer_section.parse("total_steps", trainer_defaults.total_steps)?,
        eval_every: trainer_section.parse("eval_every", trainer_defaults.eval_every)?,
        eval_episodes: trainer_section.parse("eval_episodes", trainer_defaults.eval_episodes)?,
        e_from_training: trainer_section
            .parse("e_from_training", trainer_defaults.e_from_training)?,
        seed: trainer_section.parse("seed", trainer_defaults.seed)?,
        out_dir,
    };
    trainer_section.reject_unknown("trainer")?;

    // Re-insert the consumed sections for error attribution.
    let mut all = BTreeMap::new();
    all.insert("env".to_string(), env_section);
    all.insert("coach".to_string(), coach_section);
    all.insert("learner".to_string(), learner_section);
    all.insert("trainer".to_string(), trainer_section);
    config.validate().map_err(|e| blame(e, &all))?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_text(&fs::read_to_string(path)?)
}

pub fn serialize_config(config: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[env]");
    match &config.env {
        EnvSpec::Desk6x6 => {
            let _ = writeln!(out, "kind = desk6x6");
        }
        EnvSpec::Paper10x10 => {
            let _ = writeln!(out, "kind = paper10x10");
        }
        EnvSpec::Parametric {
            n_agents,
            n_buttons,
            width,
            height,
            max_steps,
            layout_seed,
        } => {
            let _ = writeln!(out, "kind = parametric");
            let _ = writeln!(out, "n_agents = {n_agents}");
            let _ = writeln!(out, "n_buttons = {n_buttons}");
            let _ = writeln!(out, "width = {width}");
            let _ = writeln!(out, "height = {height}");
            let _ = writeln!(out, "max_steps = {max_steps}");
            let _ = writeln!(out, "layout_seed = {layout_seed}");
        }
        EnvSpec::Custom(c) => {
            let _ = writeln!(out, "kind = custom");
            let _ = writeln!(out, "width = {}", c.width);
            let _ = writeln!(out, "height = {}", c.height);
            let _ = writeln!(out, "agent_starts = {}", format_positions(&c.agent_starts));
            let _ = writeln!(
                out,
                "button_positions = {}",
                format_positions(&c.button_positions)
            );
            let _ = writeln!(out, "max_steps = {}", c.max_steps);
            let _ = writeln!(out, "step_reward = {}", c.step_reward);
            let _ = writeln!(out, "button_reward = {}", c.button_reward);
            let _ = writeln!(out, "discount = {}", c.discount);
        }
    }

    let _ = writeln!(out, "\n[coach]");
    match config.coach {
        CoachStrategy::Fixed { alpha } => {
            let _ = writeln!(out, "strategy = fixed");
            let _ = writeln!(out, "alpha = {alpha}");
        }
        CoachStrategy::Curriculum {
            delta_alpha,
            alpha_max,
        } => {
            let _ = writeln!(out, "strategy = curriculum");
            let _ = writeln!(out, "delta_alpha = {delta_alpha}");
            let _ = writeln!(out, "alpha_max = {alpha_max}");
        }
        CoachStrategy::Adaptive {
            beta,
            rho,
            alpha_init,
        } => {
            let _ = writeln!(out, "strategy = adaptive");
            let _ = writeln!(out, "beta = {beta}");
            let _ = writeln!(out, "rho = {rho}");
            let _ = writeln!(out, "alpha_init = {alpha_init}");
        }
    }

    let l = &config.learner;
    let _ = writeln!(out, "\n[learner]");
    let _ = writeln!(
        out,
        "mixer = {}",
        match l.mixer {
            MixerKind::QmixMono => "qmix",
            MixerKind::VdnSum => "vdn",
        }
    );
    let _ = writeln!(out, "hidden = {}", l.hidden);
    let _ = writeln!(out, "embed = {}", l.embed);
    let _ = writeln!(out, "learning_rate = {}", l.learning_rate);
    let _ = writeln!(out, "rms_decay = {}", l.rms_decay);
    let _ = writeln!(out, "rms_eps = {}", l.rms_eps);
    let _ = writeln!(out, "buffer_capacity = {}", l.buffer_capacity);
    let _ = writeln!(out, "batch_episodes = {}", l.batch_episodes);
    let _ = writeln!(out, "epsilon_start = {}", l.epsilon_start);
    let _ = writeln!(out, "epsilon_end = {}", l.epsilon_end);
    let _ = writeln!(out, "epsilon_anneal_frac = {}", l.epsilon_anneal_frac);
    let _ = writeln!(out, "target_period = {}", l.target_period);
    let _ = writeln!(out, "include_prev_action = {}", l.include_prev_action);
    let _ = writeln!(out, "mask_crashed_in_loss = {}", l.mask_crashed_in_loss);

    let _ = writeln!(out, "\n[trainer]");
    let _ = writeln!(
        out,
        "behavior = {}",
        match config.behavior {
            CrashBehavior::Freeze => "freeze",
            CrashBehavior::Random => "random",
        }
    );
    let _ = writeln!(out, "resample = {}", config.resample);
    let _ = writeln!(out, "resample_max_tries = {}", config.resample_max_tries);
    let _ = writeln!(out, "total_steps = {}", config.total_steps);
    let _ = writeln!(out, "eval_every = {}", config.eval_every);
    let _ = writeln!(out, "eval_episodes = {}", config.eval_episodes);
    let _ = writeln!(out, "e_from_training = {}", config.e_from_training);
    let _ = writeln!(out, "seed = {}", config.seed);
    if let Some(dir) = &config.out_dir {
        let _ = writeln!(out, "out_dir = {dir}");
    }
    out
}
