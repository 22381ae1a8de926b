//! From-scratch value-decomposition Q-learner.
//!
//! A shared feedforward agent network produces per-agent Q-values; a mixer
//! (plain sum or monotone state-conditioned mixing) combines the chosen
//! values into a team value for TD learning with a periodically refreshed
//! target copy. Gradients are computed by manual backpropagation in 64-bit
//! arithmetic throughout.

mod mixer;
mod net;
mod optim;
mod replay;
mod td;

pub use mixer::{MixCache, Mixer, MixerGrads, MixerKind, QmixMixer};
pub use net::{AgentNet, AgentNetCache, AgentNetConfig, AgentNetGrads};
pub use optim::RmsProp;
pub use replay::ReplayBuffer;
pub use td::{episode_transitions, td_loss_and_grads, Transition};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Learner hyperparameters. Defaults follow the usual value-decomposition
/// training recipe scaled to desk size; every field is config-overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub hidden: usize,
    pub embed: usize,
    pub mixer: MixerKind,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    pub buffer_capacity: usize,
    pub batch_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of total training steps over which epsilon anneals linearly.
    pub epsilon_anneal_frac: f64,
    /// Target copies refresh every this many learning updates.
    pub target_period: u64,
    pub include_prev_action: bool,
    pub mask_crashed_in_loss: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            embed: 32,
            mixer: MixerKind::QmixMono,
            learning_rate: 5e-4,
            rms_decay: 0.99,
            rms_eps: 1e-5,
            buffer_capacity: 5000,
            batch_episodes: 32,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_frac: 0.1,
            target_period: 200,
            include_prev_action: false,
            mask_crashed_in_loss: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(CoreError::InvalidConfig { detail });
        if self.hidden == 0 || self.embed == 0 {
            return fail("hidden and embed widths must be positive".into());
        }
        if self.buffer_capacity == 0 || self.batch_episodes == 0 {
            return fail("buffer capacity and batch size must be positive".into());
        }
        if self.batch_episodes > self.buffer_capacity {
            return fail("batch cannot exceed buffer capacity".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return fail(format!("rms decay must be in [0, 1), got {}", self.rms_decay));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("epsilon_anneal_frac", self.epsilon_anneal_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.target_period == 0 {
            return fail("target period must be >= 1".into());
        }
        Ok(())
    }
}

/// Static shapes everything in a [`LearnerParams`] is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerDims {
    pub obs_dim: usize,
    pub n_agents: usize,
    pub action_count: usize,
    pub state_dim: usize,
    pub hidden: usize,
    pub embed: usize,
    pub mixer: MixerKind,
    pub include_prev_action: bool,
}

/// Online and target copies of the agent network and mixer, plus the
/// bookkeeping the trainer needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    pub dims: LearnerDims,
    pub agent: AgentNet,
    pub mixer: Mixer,
    pub target_agent: AgentNet,
    pub target_mixer: Mixer,
    /// Learning updates applied so far (drives target refresh cadence).
    pub updates: u64,
    pub gamma: f64,
}

impl LearnerParams {
    pub fn init(
        obs_dim: usize,
        n_agents: usize,
        action_count: usize,
        state_dim: usize,
        cfg: &LearnerConfig,
        gamma: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        let dims = LearnerDims {
            obs_dim,
            n_agents,
            action_count,
            state_dim,
            hidden: cfg.hidden,
            embed: cfg.embed,
            mixer: cfg.mixer,
            include_prev_action: cfg.include_prev_action,
        };
        Self::init_from_dims(dims, gamma, rng)
    }

    pub fn init_from_dims(dims: LearnerDims, gamma: f64, rng: &mut dyn RngCore) -> Self {
        let agent = AgentNet::init(
            AgentNetConfig {
                obs_dim: dims.obs_dim,
                n_agents: dims.n_agents,
                action_count: dims.action_count,
                hidden: dims.hidden,
                include_prev_action: dims.include_prev_action,
            },
            rng,
        );
        let mixer = Mixer::init(dims.mixer, dims.n_agents, dims.state_dim, dims.embed, rng);
        let target_agent = agent.clone();
        let target_mixer = mixer.clone();
        Self {
            dims,
            agent,
            mixer,
            target_agent,
            target_mixer,
            updates: 0,
            gamma,
        }
    }

    /// Copy the online networks into the target copies, bit-identically.
    pub fn refresh_target(&mut self) {
        self.target_agent = self.agent.clone();
        self.target_mixer = self.mixer.clone();
    }

    pub fn online_param_count(&self) -> usize {
        self.agent.param_count() + self.mixer.param_count()
    }

    /// Flatten the online parameters in canonical order.
    pub fn online_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.online_param_count());
        self.agent.flatten_into(&mut out);
        self.mixer.flatten_into(&mut out);
        out
    }

    /// Assign the online parameters from a flat vector in canonical order.
    pub fn set_online_flat(&mut self, flat: &[f64]) {
        debug_assert_eq!(flat.len(), self.online_param_count());
        let off = self.agent.assign_from_flat(flat);
        self.mixer.assign_from_flat(&flat[off..]);
    }

    /// All tensors (online and target) with stable names, in a fixed order
    /// suitable for checkpointing.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (prefix, net) in [("agent", &self.agent), ("target_agent", &self.target_agent)] {
            for (name, t) in net.tensor_views() {
                out.push((format!("{prefix}.{name}"), t));
            }
        }
        for (prefix, mixer) in [("mixer", &self.mixer), ("target_mixer", &self.target_mixer)] {
            if let Mixer::QmixMono(m) = mixer {
                for (name, t) in m.tensor_views() {
                    // Names in tensor_views already carry the "mixer." part.
                    let bare = name.strip_prefix("mixer.").unwrap_or(name);
                    out.push((format!("{prefix}.{bare}"), t));
                }
            }
        }
        out
    }

    /// Mutable access to the same tensors in the same order as
    /// [`LearnerParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out: Vec<(String, &mut Vec<f64>)> = Vec::new();
        for (name, t) in self.agent.tensors_mut() {
            out.push((format!("agent.{name}"), t));
        }
        for (name, t) in self.target_agent.tensors_mut() {
            out.push((format!("target_agent.{name}"), t));
        }
        if let Mixer::QmixMono(m) = &mut self.mixer {
            for (name, t) in m.tensors_mut() {
                let bare = name.strip_prefix("mixer.").unwrap_or(name);
                out.push((format!("mixer.{bare}"), t));
            }
        }
        if let Mixer::QmixMono(m) = &mut self.target_mixer {
            for (name, t) in m.tensors_mut() {
                let bare = name.strip_prefix("mixer.").unwrap_or(name);
                out.push((format!("target_mixer.{bare}"), t));
            }
        }
        out
    }
}

/// Epsilon-greedy action selection: with probability `epsilon` a uniform
/// action, otherwise the argmax with lowest-index tie-break.
pub fn epsilon_greedy(qs: &[f64], epsilon: f64, rng: &mut dyn RngCore) -> Result<usize> {
    if qs.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "qs",
            detail: "need at least one action".into(),
        });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(CoreError::InvalidParameter {
            name: "epsilon",
            detail: format!("must be in [0, 1], got {epsilon}"),
        });
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..qs.len()));
    }
    let mut best = 0;
    for (i, &q) in qs.iter().enumerate().skip(1) {
        if q > qs[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Gradients for every online parameter.
#[derive(Debug, Clone)]
pub struct LearnerGrads {
    pub agent: AgentNetGrads,
    pub mixer: MixerGrads,
}

impl LearnerGrads {
    pub fn zeros(params: &LearnerParams) -> Self {
        Self {
            agent: AgentNetGrads::zeros(params.agent.config()),
            mixer: MixerGrads::zeros(&params.mixer),
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        self.agent.flatten_into(out);
        self.mixer.flatten_into(out);
    }
}

/// Apply one optimiser step to the online parameters and advance the update
/// counter. The parameters are untouched if the update is non-finite.
pub fn apply_gradients(
    params: &mut LearnerParams,
    grads: &LearnerGrads,
    opt: &mut RmsProp,
) -> Result<()> {
    let mut flat = params.online_flat();
    let mut gflat = Vec::with_capacity(flat.len());
    grads.flatten_into(&mut gflat);
    opt.step(&mut flat, &gflat)?;
    params.set_online_flat(&flat);
    params.updates += 1;
    Ok(())
}
