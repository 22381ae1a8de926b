//! Deterministic grid world: agents must touch every button within a step
//! budget.
//!
//! Agents move simultaneously in four directions or stay put; moving off the
//! grid leaves the agent in place. A button is touched the first time any
//! agent occupies its cell after moving, and stays touched. The team reward
//! each step is `step_reward` plus `button_reward` for every button newly
//! touched that step. Each agent observes only its own location; the global
//! state carries every agent and button location plus the touched flags.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{EnvModel, ResetOutcome, StepOutcome};
use crate::error::{CoreError, Result};
use crate::rng::{substream, Stream};

pub const ACTION_UP: usize = 0;
pub const ACTION_DOWN: usize = 1;
pub const ACTION_LEFT: usize = 2;
pub const ACTION_RIGHT: usize = 3;
pub const ACTION_STAY: usize = 4;
/// Up, down, left, right, stay.
pub const GRID_ACTIONS: usize = 5;

/// Static description of one buttons task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridButtonsConfig {
    pub width: usize,
    pub height: usize,
    pub agent_starts: Vec<(usize, usize)>,
    pub button_positions: Vec<(usize, usize)>,
    pub max_steps: usize,
    pub step_reward: f64,
    pub button_reward: f64,
    pub discount: f64,
}

impl GridButtonsConfig {
    /// The fixed 10x10 two-agent / two-button layout. The published task
    /// fixes agent and button locations without listing them; this symmetric
    /// stand-in gives each agent one nearby button.
    pub fn paper_layout() -> Self {
        Self {
            width: 10,
            height: 10,
            agent_starts: alloc::vec![(1, 1), (8, 8)],
            button_positions: alloc::vec![(8, 1), (1, 8)],
            max_steps: 20,
            step_reward: -1.0,
            button_reward: 5.0,
            discount: 0.99,
        }
    }

    /// Desk-scale 6x6 default. Each agent has one button four steps away,
    /// and a single agent can still tour both buttons within the budget
    /// (4 + 8 = 12 <= 20 steps), so the task stays solvable when the other
    /// agent crashes.
    pub fn desk_layout() -> Self {
        Self {
            width: 6,
            height: 6,
            agent_starts: alloc::vec![(0, 0), (5, 5)],
            button_positions: alloc::vec![(4, 0), (1, 5)],
            max_steps: 20,
            step_reward: -1.0,
            button_reward: 5.0,
            discount: 0.99,
        }
    }

    /// Deterministically place `n_agents` starts and `n_buttons` buttons on
    /// distinct cells of a `width x height` grid. The same seed always
    /// produces the same layout.
    pub fn parametric(
        n_agents: usize,
        n_buttons: usize,
        width: usize,
        height: usize,
        max_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_agents == 0 || n_buttons == 0 {
            return Err(CoreError::InvalidConfig {
                detail: "need at least one agent and one button".into(),
            });
        }
        let cells = width.checked_mul(height).unwrap_or(0);
        if cells < n_agents + n_buttons {
            return Err(CoreError::InvalidConfig {
                detail: format!(
                    "{width}x{height} grid cannot hold {n_agents} agents and {n_buttons} buttons on distinct cells"
                ),
            });
        }
        let mut rng = substream(seed, Stream::Layout, 0);
        let mut taken: Vec<(usize, usize)> = Vec::with_capacity(n_agents + n_buttons);
        while taken.len() < n_agents + n_buttons {
            let cell = (rng.gen_range(0..width), rng.gen_range(0..height));
            if !taken.contains(&cell) {
                taken.push(cell);
            }
        }
        let button_positions = taken.split_off(n_agents);
        let config = Self {
            width,
            height,
            agent_starts: taken,
            button_positions,
            max_steps,
            step_reward: -1.0,
            button_reward: 5.0,
            discount: 0.99,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn n_agents(&self) -> usize {
        self.agent_starts.len()
    }

    pub fn n_buttons(&self) -> usize {
        self.button_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(CoreError::InvalidConfig { detail });
        if self.width == 0 || self.height == 0 {
            return fail("grid must have positive extent".into());
        }
        if self.agent_starts.is_empty() {
            return fail("need at least one agent".into());
        }
        if self.max_steps == 0 {
            return fail("max_steps must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            return fail(format!("discount must be in [0, 1), got {}", self.discount));
        }
        for &(x, y) in self.agent_starts.iter().chain(&self.button_positions) {
            if x >= self.width || y >= self.height {
                return fail(format!(
                    "position ({x}, {y}) outside {}x{} grid",
                    self.width, self.height
                ));
            }
        }
        Ok(())
    }
}

/// Mutable episode state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub agent_positions: Vec<(usize, usize)>,
    pub button_touched: Vec<bool>,
    pub step_index: usize,
}

impl GridState {
    pub fn all_buttons_touched(&self) -> bool {
        self.button_touched.iter().all(|&t| t)
    }
}

/// A buttons-task environment instance.
#[derive(Debug, Clone)]
pub struct GridButtonsEnv {
    config: GridButtonsConfig,
    state: GridState,
}

fn scale(v: usize, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        v as f64 / (extent - 1) as f64
    }
}

impl GridButtonsEnv {
    pub fn new(config: GridButtonsConfig) -> Result<Self> {
        config.validate()?;
        let state = GridState {
            agent_positions: config.agent_starts.clone(),
            button_touched: alloc::vec![false; config.n_buttons()],
            step_index: 0,
        };
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &GridButtonsConfig {
        &self.config
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    fn observation(&self, agent: usize) -> Vec<f64> {
        let (x, y) = self.state.agent_positions[agent];
        alloc::vec![scale(x, self.config.width), scale(y, self.config.height)]
    }

    fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.config.n_agents())
            .map(|i| self.observation(i))
            .collect()
    }

    fn global_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        for &(x, y) in &self.state.agent_positions {
            s.push(scale(x, self.config.width));
            s.push(scale(y, self.config.height));
        }
        for &(x, y) in &self.config.button_positions {
            s.push(scale(x, self.config.width));
            s.push(scale(y, self.config.height));
        }
        for &t in &self.state.button_touched {
            s.push(t as u8 as f64);
        }
        s
    }

}

impl EnvModel for GridButtonsEnv {
    fn n_agents(&self) -> usize {
        self.config.n_agents()
    }

    fn action_count(&self) -> usize {
        GRID_ACTIONS
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn state_dim(&self) -> usize {
        2 * self.config.n_agents() + 3 * self.config.n_buttons()
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }

    fn noop_action(&self) -> usize {
        ACTION_STAY
    }

    fn discount(&self) -> f64 {
        self.config.discount
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> ResetOutcome {
        // Initial locations are fixed by the config; the episode is
        // deterministic and the generator is unused.
        self.state = GridState {
            agent_positions: self.config.agent_starts.clone(),
            button_touched: alloc::vec![false; self.config.n_buttons()],
            step_index: 0,
        };
        ResetOutcome {
            observations: self.observations(),
            global_state: self.global_state(),
        }
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome> {
        if joint_action.len() != self.n_agents() {
            return Err(CoreError::DimensionMismatch {
                what: "joint action",
                expected: self.n_agents(),
                got: joint_action.len(),
            });
        }
        for &a in joint_action {
            if a >= GRID_ACTIONS {
                return Err(CoreError::InvalidParameter {
                    name: "action",
                    detail: format!("action id {a} out of range 0..{GRID_ACTIONS}"),
                });
            }
        }

        // All agents move simultaneously; off-grid moves are no-ops.
        for (pos, &a) in self.state.agent_positions.iter_mut().zip(joint_action) {
            let (x, y) = *pos;
            *pos = match a {
                ACTION_UP => (x, y.saturating_sub(1)),
                ACTION_DOWN => (x, if y + 1 < self.config.height { y + 1 } else { y }),
                ACTION_LEFT => (x.saturating_sub(1), y),
                ACTION_RIGHT => (if x + 1 < self.config.width { x + 1 } else { x }, y),
                _ => (x, y),
            };
        }

        let mut newly_touched = 0usize;
        for (b, touched) in self.state.button_touched.iter_mut().enumerate() {
            if !*touched
                && self
                    .state
                    .agent_positions
                    .iter()
                    .any(|&p| p == self.config.button_positions[b])
            {
                *touched = true;
                newly_touched += 1;
            }
        }

        self.state.step_index += 1;
        let reward = self.config.step_reward + self.config.button_reward * newly_touched as f64;
        let done =
            self.state.all_buttons_touched() || self.state.step_index >= self.config.max_steps;

        Ok(StepOutcome {
            observations: self.observations(),
            global_state: self.global_state(),
            reward,
            done,
        })
    }

    fn is_success(&self) -> bool {
        self.state.all_buttons_touched()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use alloc::collections::VecDeque;

    fn rng(salt: u64) -> rand_chacha::ChaCha8Rng {
        substream(7, Stream::Eval, salt)
    }

    /// Breadth-first-search distance oracle on the open grid.
    fn bfs_distance(config: &GridButtonsConfig, from: (usize, usize), to: (usize, usize)) -> usize {
        let mut seen = vec![false; config.width * config.height];
        let mut queue = VecDeque::new();
        queue.push_back((from, 0));
        seen[from.1 * config.width + from.0] = true;
        while let Some((pos, d)) = queue.pop_front() {
            if pos == to {
                return d;
            }
            let (x, y) = pos;
            let mut push = |nx: usize, ny: usize, seen: &mut Vec<bool>| {
                if !seen[ny * config.width + nx] {
                    seen[ny * config.width + nx] = true;
                    queue.push_back(((nx, ny), d + 1));
                }
            };
            if y > 0 {
                push(x, y - 1, &mut seen);
            }
            if y + 1 < config.height {
                push(x, y + 1, &mut seen);
            }
            if x > 0 {
                push(x - 1, y, &mut seen);
            }
            if x + 1 < config.width {
                push(x + 1, y, &mut seen);
            }
        }
        unreachable!("open grid is connected");
    }

    /// One greedy step along a shortest path (x first, then y).
    fn step_toward(from: (usize, usize), to: (usize, usize)) -> usize {
        if from.0 < to.0 {
            ACTION_RIGHT
        } else if from.0 > to.0 {
            ACTION_LEFT
        } else if from.1 < to.1 {
            ACTION_DOWN
        } else if from.1 > to.1 {
            ACTION_UP
        } else {
            ACTION_STAY
        }
    }

    #[test]
    fn reset_matches_contract() {
        let mut env = GridButtonsEnv::new(GridButtonsConfig::paper_layout()).unwrap();
        let out = env.reset(&mut rng(0));
        assert_eq!(out.observations.len(), 2);
        for obs in &out.observations {
            assert_eq!(obs.len(), 2);
        }
        assert_eq!(out.global_state.len(), env.state_dim());
        assert!(env.state().button_touched.iter().all(|&t| !t));
        assert_eq!(env.state().step_index, 0);

        // Determinism: a second reset reproduces the same outputs.
        let again = env.reset(&mut rng(1));
        assert_eq!(out, again);
    }

    #[test]
    fn observation_is_own_scaled_location() {
        let mut env = GridButtonsEnv::new(GridButtonsConfig::paper_layout()).unwrap();
        let out = env.reset(&mut rng(0));
        assert_eq!(out.observations[0], vec![1.0 / 9.0, 1.0 / 9.0]);
        assert_eq!(out.observations[1], vec![8.0 / 9.0, 8.0 / 9.0]);
    }

    #[test]
    fn step_rewards_stack_button_on_step() {
        let mut env = GridButtonsEnv::new(GridButtonsConfig::desk_layout()).unwrap();
        env.reset(&mut rng(0));
        // Both stay: nothing touched, default reward.
        let out = env.step(&[ACTION_STAY, ACTION_STAY]).unwrap();
        assert_eq!(out.reward, -1.0);
        assert!(!out.done);
        assert_eq!(
            env.state().agent_positions,
            GridButtonsConfig::desk_layout().agent_starts
        );

        // Walk agent 0 onto its button at (4, 0): four moves right.
        for i in 0..4 {
            let out = env.step(&[ACTION_RIGHT, ACTION_STAY]).unwrap();
            if i < 3 {
                assert_eq!(out.reward, -1.0);
            } else {
                // Newly touched button stacks on the step reward.
                assert_eq!(out.reward, -1.0 + 5.0);
            }
        }
        assert_eq!(env.state().button_touched, vec![true, false]);
    }

    #[test]
    fn done_when_all_buttons_touched() {
        let config = GridButtonsConfig {
            width: 3,
            height: 1,
            agent_starts: vec![(0, 0)],
            button_positions: vec![(1, 0)],
            max_steps: 5,
            step_reward: -1.0,
            button_reward: 5.0,
            discount: 0.99,
        };
        let mut env = GridButtonsEnv::new(config).unwrap();
        env.reset(&mut rng(0));
        let out = env.step(&[ACTION_RIGHT]).unwrap();
        assert!(out.done);
        assert!(env.is_success());
        assert_eq!(out.reward, 4.0);
    }

    #[test]
    fn done_at_step_budget_without_success() {
        let mut env = GridButtonsEnv::new(GridButtonsConfig::desk_layout()).unwrap();
        env.reset(&mut rng(0));
        for i in 0..20 {
            let out = env.step(&[ACTION_STAY, ACTION_STAY]).unwrap();
            assert_eq!(out.done, i == 19);
        }
        assert!(!env.is_success());
    }

    #[test]
    fn zero_buttons_success_is_vacuous() {
        let config = GridButtonsConfig {
            width: 2,
            height: 2,
            agent_starts: vec![(0, 0)],
            button_positions: vec![],
            max_steps: 3,
            step_reward: -1.0,
            button_reward: 5.0,
            discount: 0.99,
        };
        let env = GridButtonsEnv::new(config).unwrap();
        assert!(env.is_success());
    }

    #[test]
    fn partial_touch_is_not_success() {
        let mut env = GridButtonsEnv::new(GridButtonsConfig::desk_layout()).unwrap();
        env.reset(&mut rng(0));
        for _ in 0..4 {
            env.step(&[ACTION_RIGHT, ACTION_STAY]).unwrap();
        }
        assert_eq!(env.state().button_touched, vec![true, false]);
        assert!(!env.is_success());
    }

    #[test]
    fn malformed_action_is_rejected() {
        let mut env = GridButtonsEnv::new(GridButtonsConfig::desk_layout()).unwrap();
        env.reset(&mut rng(0));
        assert!(env.step(&[5, 0]).is_err());
        assert!(env.step(&[0]).is_err());
    }

    #[test]
    fn parametric_layouts_are_deterministic() {
        let a = GridButtonsConfig::parametric(8, 8, 12, 12, 30, 7).unwrap();
        let b = GridButtonsConfig::parametric(8, 8, 12, 12, 30, 7).unwrap();
        assert_eq!(a, b);

        let c = GridButtonsConfig::parametric(8, 8, 12, 12, 30, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn parametric_matches_fixed_task_shape() {
        let config = GridButtonsConfig::parametric(2, 2, 10, 10, 20, 3).unwrap();
        assert_eq!(config.n_agents(), 2);
        assert_eq!(config.n_buttons(), 2);
        assert_eq!((config.width, config.height), (10, 10));
        // All entities on distinct cells.
        let mut cells: Vec<_> = config
            .agent_starts
            .iter()
            .chain(&config.button_positions)
            .collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 4);
    }

    #[test]
    fn parametric_rejects_overfull_grid() {
        let err = GridButtonsConfig::parametric(100, 1, 1, 1, 10, 0).unwrap_err();
        assert!(matches!(err, CoreError::InvalidConfig { .. }));
    }

    #[test]
    fn optimal_play_finishes_before_budget_on_fixed_layouts() {
        // Each agent walks a shortest path to its nearby button; the BFS
        // oracle bounds the episode length.
        for config in [
            GridButtonsConfig::paper_layout(),
            GridButtonsConfig::desk_layout(),
        ] {
            let d0 = bfs_distance(&config, config.agent_starts[0], config.button_positions[0]);
            let d1 = bfs_distance(&config, config.agent_starts[1], config.button_positions[1]);
            assert!(d0.max(d1) < config.max_steps);

            let mut env = GridButtonsEnv::new(config.clone()).unwrap();
            env.reset(&mut rng(0));
            let mut steps = 0;
            loop {
                let joint: Vec<usize> = (0..2)
                    .map(|i| {
                        step_toward(env.state().agent_positions[i], config.button_positions[i])
                    })
                    .collect();
                let out = env.step(&joint).unwrap();
                steps += 1;
                if out.done {
                    break;
                }
            }
            assert!(env.is_success());
            assert_eq!(steps, d0.max(d1));
            assert!(steps < config.max_steps);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Boundary safety, touch monotonicity and the return identity on
            // random rollouts.
            #[test]
            fn random_rollouts_respect_invariants(
                actions in proptest::collection::vec(
                    proptest::collection::vec(0usize..GRID_ACTIONS, 2),
                    1..40,
                ),
            ) {
                let config = GridButtonsConfig::desk_layout();
                let mut env = GridButtonsEnv::new(config.clone()).unwrap();
                env.reset(&mut rng(0));
                let mut prev_touched = env.state().button_touched.clone();
                let mut ret = 0.0;
                let mut steps = 0;
                for joint in &actions {
                    let out = env.step(joint).unwrap();
                    ret += out.reward;
                    steps += 1;
                    for (now, before) in env.state().button_touched.iter().zip(&prev_touched) {
                        prop_assert!(*now || !*before, "touched flag reverted");
                    }
                    prev_touched = env.state().button_touched.clone();
                    for &(x, y) in &env.state().agent_positions {
                        prop_assert!(x < config.width && y < config.height);
                    }
                    if out.done {
                        break;
                    }
                }
                let touched = env.state().button_touched.iter().filter(|&&t| t).count();
                let expected = config.step_reward * steps as f64
                    + config.button_reward * touched as f64;
                prop_assert_eq!(ret, expected);
                prop_assert!(env.state().step_index <= config.max_steps);
            }
        }
    }
}
