//! In-memory records produced by training and evaluation: episode traces,
//! per-round log rows, evaluation reports and replayable trajectory dumps.
//!
//! Serialization of these records to files lives in the companion crate.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::crash::CrashMask;
use crate::env::EnvModel;
use crate::error::{CoreError, Result};
use crate::gridworld::{GridButtonsConfig, GridButtonsEnv};
use crate::rng::{substream, Stream};

/// One environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Per-agent observations before the step.
    pub observations: Vec<Vec<f64>>,
    /// Global state before the step.
    pub global_state: Vec<f64>,
    /// Joint action proposed by the policies.
    pub proposed: Vec<usize>,
    /// Joint action actually executed (crash substitution applied).
    pub executed: Vec<usize>,
    pub reward: f64,
    pub done: bool,
}

/// A full episode trace plus its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Crash mask drawn at episode start; constant for the whole episode.
    pub mask: CrashMask,
    pub steps: Vec<StepRecord>,
    pub success: bool,
    pub episode_return: f64,
}

impl EpisodeRecord {
    pub fn length(&self) -> usize {
        self.steps.len()
    }
}

/// One row of the training log, emitted once per coach round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub round: usize,
    pub env_steps: u64,
    /// Crash rate the round was trained under.
    pub alpha: f64,
    /// Performance observed by the coach at the end of the round.
    pub e: f64,
    /// Mean TD loss over the round's updates (0 before learning starts).
    pub loss: f64,
    pub epsilon: f64,
    pub wall_ms: u64,
}

/// Outcome of a single evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub episode_return: f64,
    pub length: usize,
    pub crashes: usize,
}

/// Aggregate result of an evaluation block at one crash rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub crash_rate: f64,
    pub episodes: usize,
    /// Fraction of episodes that reached the task goal.
    pub success_rate: f64,
    pub mean_return: f64,
    pub outcomes: Vec<EpisodeOutcome>,
}

/// A replayable greedy trajectory on the buttons task.
///
/// Feeding `executed` back through an environment built from `config` must
/// reproduce `positions` and `rewards` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub config: GridButtonsConfig,
    pub mask: Vec<bool>,
    /// Joint actions executed at each step.
    pub executed: Vec<Vec<usize>>,
    /// Agent positions after each step.
    pub positions: Vec<Vec<(usize, usize)>>,
    pub rewards: Vec<f64>,
    pub success: bool,
}

impl TrajectoryDump {
    /// Replay the recorded actions through a fresh environment and verify
    /// that positions, rewards and the outcome all match.
    pub fn verify_replay(&self) -> Result<()> {
        let mismatch = |detail: String| Err(CoreError::InvalidConfig { detail });
        let mut env = GridButtonsEnv::new(self.config.clone())?;
        // The environment is deterministic; the generator is unused.
        let mut rng = substream(0, Stream::Eval, 0);
        env.reset(&mut rng);
        if self.executed.len() != self.positions.len() || self.executed.len() != self.rewards.len()
        {
            return mismatch("trajectory step arrays disagree in length".into());
        }
        for (t, joint) in self.executed.iter().enumerate() {
            let out = env.step(joint)?;
            if env.state().agent_positions != self.positions[t] {
                return mismatch(alloc::format!("position mismatch at step {t}"));
            }
            if out.reward != self.rewards[t] {
                return mismatch(alloc::format!("reward mismatch at step {t}"));
            }
            if out.done != (t + 1 == self.executed.len()) {
                return mismatch(alloc::format!("termination mismatch at step {t}"));
            }
        }
        if env.is_success() != self.success {
            return mismatch("outcome flag does not match replay".into());
        }
        Ok(())
    }
}
