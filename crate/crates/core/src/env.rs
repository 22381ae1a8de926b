//! The episode contract every environment implements.
//!
//! An environment owns `n_agents` agents that act simultaneously on a shared
//! team reward. `reset` yields one partial observation per agent plus one
//! global state vector; `step` consumes one joint action and yields the next
//! observations, state, team reward and a done flag. Episodes terminate no
//! later than `max_steps`.

use alloc::vec::Vec;
use rand_chacha::rand_core::RngCore;

use crate::error::Result;

/// Output of [`EnvModel::reset`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResetOutcome {
    /// One observation vector per agent.
    pub observations: Vec<Vec<f64>>,
    /// The global state (training-time only; never shown to agents).
    pub global_state: Vec<f64>,
}

/// Output of [`EnvModel::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observations: Vec<Vec<f64>>,
    pub global_state: Vec<f64>,
    /// Team reward shared by all agents.
    pub reward: f64,
    pub done: bool,
}

pub trait EnvModel {
    fn n_agents(&self) -> usize;
    /// Number of discrete actions available to each agent.
    fn action_count(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn max_steps(&self) -> usize;
    /// The action id a frozen (crashed) agent executes.
    fn noop_action(&self) -> usize;
    /// Discount factor in [0, 1).
    fn discount(&self) -> f64;

    /// Start a new episode.
    fn reset(&mut self, rng: &mut dyn RngCore) -> ResetOutcome;

    /// Advance one step with a joint action of length `n_agents`.
    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome>;

    /// Whether the task goal has been reached (valid once the episode is
    /// finished; on the buttons task: every button touched).
    fn is_success(&self) -> bool;
}
