//! Shared per-agent Q-network: a two-hidden-layer feedforward net over the
//! agent's observation, an agent-id one-hot and (optionally) a one-hot of the
//! agent's previous executed action.
//!
//! All parameter sharing happens by construction: every agent evaluates the
//! same network, distinguished only by its id input.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// elu(x), a rectifier with a continuous first derivative, which keeps
/// central finite differences honest for the gradient checks.
pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        libm::exp(x) - 1.0
    }
}

pub(crate) fn elu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        libm::exp(x)
    }
}

/// Static shape of the agent network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentNetConfig {
    pub obs_dim: usize,
    pub n_agents: usize,
    pub action_count: usize,
    pub hidden: usize,
    pub include_prev_action: bool,
}

impl AgentNetConfig {
    pub fn input_dim(&self) -> usize {
        self.obs_dim
            + self.n_agents
            + if self.include_prev_action {
                self.action_count
            } else {
                0
            }
    }
}

/// Dense layer weights, row-major by output: `w[out * in_dim + in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNet {
    pub(crate) cfg: AgentNetConfig,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
    pub(crate) w3: Vec<f64>,
    pub(crate) b3: Vec<f64>,
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for a layer.
pub(crate) fn init_layer(
    out_dim: usize,
    in_dim: usize,
    rng: &mut dyn RngCore,
) -> (Vec<f64>, Vec<f64>) {
    let bound = 1.0 / libm::sqrt(in_dim as f64);
    let w = (0..out_dim * in_dim)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let b = (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
    (w, b)
}

pub(crate) fn matvec(w: &[f64], b: &[f64], x: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = b[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out.push(acc);
    }
    out
}

/// Intermediates kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct AgentNetCache {
    pub(crate) input: Vec<f64>,
    pub(crate) z1: Vec<f64>,
    pub(crate) a1: Vec<f64>,
    pub(crate) z2: Vec<f64>,
    pub(crate) a2: Vec<f64>,
}

/// Gradient accumulator with the same shapes as [`AgentNet`].
#[derive(Debug, Clone)]
pub struct AgentNetGrads {
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
    pub(crate) w3: Vec<f64>,
    pub(crate) b3: Vec<f64>,
}

impl AgentNetGrads {
    pub fn zeros(cfg: &AgentNetConfig) -> Self {
        let input = cfg.input_dim();
        Self {
            w1: alloc::vec![0.0; cfg.hidden * input],
            b1: alloc::vec![0.0; cfg.hidden],
            w2: alloc::vec![0.0; cfg.hidden * cfg.hidden],
            b2: alloc::vec![0.0; cfg.hidden],
            w3: alloc::vec![0.0; cfg.action_count * cfg.hidden],
            b3: alloc::vec![0.0; cfg.action_count],
        }
    }
}

impl AgentNet {
    pub fn init(cfg: AgentNetConfig, rng: &mut dyn RngCore) -> Self {
        let input = cfg.input_dim();
        let (w1, b1) = init_layer(cfg.hidden, input, rng);
        let (w2, b2) = init_layer(cfg.hidden, cfg.hidden, rng);
        let (w3, b3) = init_layer(cfg.action_count, cfg.hidden, rng);
        Self {
            cfg,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        }
    }

    pub fn config(&self) -> &AgentNetConfig {
        &self.cfg
    }

    fn build_input(
        &self,
        observation: &[f64],
        agent_id: usize,
        prev_action: Option<usize>,
    ) -> Result<Vec<f64>> {
        if observation.len() != self.cfg.obs_dim {
            return Err(CoreError::DimensionMismatch {
                what: "observation",
                expected: self.cfg.obs_dim,
                got: observation.len(),
            });
        }
        if agent_id >= self.cfg.n_agents {
            return Err(CoreError::InvalidParameter {
                name: "agent_id",
                detail: format!("{agent_id} out of range 0..{}", self.cfg.n_agents),
            });
        }
        let mut input = Vec::with_capacity(self.cfg.input_dim());
        input.extend_from_slice(observation);
        for i in 0..self.cfg.n_agents {
            input.push((i == agent_id) as u8 as f64);
        }
        if self.cfg.include_prev_action {
            // None (episode start) encodes as the all-zero one-hot.
            for a in 0..self.cfg.action_count {
                input.push((prev_action == Some(a)) as u8 as f64);
            }
        }
        Ok(input)
    }

    /// Per-action Q-values for one agent's observation.
    pub fn q_values(
        &self,
        observation: &[f64],
        agent_id: usize,
        prev_action: Option<usize>,
    ) -> Result<Vec<f64>> {
        Ok(self
            .forward_cached(observation, agent_id, prev_action)?
            .0)
    }

    /// Forward pass that also returns the intermediates needed by
    /// [`AgentNet::backward`].
    pub fn forward_cached(
        &self,
        observation: &[f64],
        agent_id: usize,
        prev_action: Option<usize>,
    ) -> Result<(Vec<f64>, AgentNetCache)> {
        let input = self.build_input(observation, agent_id, prev_action)?;
        let in_dim = self.cfg.input_dim();
        let h = self.cfg.hidden;
        let z1 = matvec(&self.w1, &self.b1, &input, h, in_dim);
        let a1: Vec<f64> = z1.iter().map(|&z| elu(z)).collect();
        let z2 = matvec(&self.w2, &self.b2, &a1, h, h);
        let a2: Vec<f64> = z2.iter().map(|&z| elu(z)).collect();
        let q = matvec(&self.w3, &self.b3, &a2, self.cfg.action_count, h);
        Ok((
            q,
            AgentNetCache {
                input,
                z1,
                a1,
                z2,
                a2,
            },
        ))
    }

    /// Accumulate gradients for a loss whose derivative with respect to the
    /// Q-value of `action` is `dq` (all other actions have zero derivative,
    /// which is the shape TD learning produces).
    pub fn backward(
        &self,
        cache: &AgentNetCache,
        action: usize,
        dq: f64,
        grads: &mut AgentNetGrads,
    ) {
        let h = self.cfg.hidden;
        let in_dim = self.cfg.input_dim();

        // Output layer: only the chosen action's row receives gradient.
        grads.b3[action] += dq;
        let w3_row = &self.w3[action * h..(action + 1) * h];
        let gw3_row = &mut grads.w3[action * h..(action + 1) * h];
        let mut dz2 = Vec::with_capacity(h);
        for j in 0..h {
            gw3_row[j] += dq * cache.a2[j];
            dz2.push(dq * w3_row[j] * elu_prime(cache.z2[j]));
        }

        let mut da1 = alloc::vec![0.0; h];
        for j in 0..h {
            let g = dz2[j];
            if g == 0.0 {
                continue;
            }
            grads.b2[j] += g;
            let w2_row = &self.w2[j * h..(j + 1) * h];
            let gw2_row = &mut grads.w2[j * h..(j + 1) * h];
            for k in 0..h {
                gw2_row[k] += g * cache.a1[k];
                da1[k] += g * w2_row[k];
            }
        }

        for j in 0..h {
            let g = da1[j] * elu_prime(cache.z1[j]);
            if g == 0.0 {
                continue;
            }
            grads.b1[j] += g;
            let gw1_row = &mut grads.w1[j * in_dim..(j + 1) * in_dim];
            for (gw, xi) in gw1_row.iter_mut().zip(&cache.input) {
                *gw += g * xi;
            }
        }
    }

    /// Tensors with stable names, in canonical (flatten) order.
    pub(crate) fn tensor_views(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![
            ("w1", &self.w1[..]),
            ("b1", &self.b1[..]),
            ("w2", &self.w2[..]),
            ("b2", &self.b2[..]),
            ("w3", &self.w3[..]),
            ("b3", &self.b3[..]),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        alloc::vec![
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
            ("w3", &mut self.w3),
            ("b3", &mut self.b3),
        ]
    }

    pub(crate) fn flatten_into(&self, out: &mut Vec<f64>) {
        for t in [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3] {
            out.extend_from_slice(t);
        }
    }

    pub(crate) fn assign_from_flat(&mut self, flat: &[f64]) -> usize {
        let mut off = 0;
        for t in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ] {
            let len = t.len();
            t.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        off
    }

    pub(crate) fn param_count(&self) -> usize {
        self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + self.b2.len()
            + self.w3.len()
            + self.b3.len()
    }
}

impl AgentNetGrads {
    pub(crate) fn flatten_into(&self, out: &mut Vec<f64>) {
        for t in [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3] {
            out.extend_from_slice(t);
        }
    }
}
