//! Mixing networks: combine per-agent chosen Q-values into one team value.
//!
//! `VdnSum` is the parameter-free arithmetic sum. `QmixMono` mixes through a
//! single hidden layer whose weights are produced by hypernetworks from the
//! global state; taking the absolute value of the generated weights makes
//! the team value monotone in every agent's Q-value, so the joint greedy
//! action factorises into per-agent argmaxes.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::net::{elu, elu_prime, init_layer, matvec};
use crate::error::{CoreError, Result};
use rand_chacha::rand_core::RngCore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixerKind {
    VdnSum,
    QmixMono,
}

/// Hypernetwork-parameterised monotone mixer.
///
/// Generated quantities, all conditioned on the global state `s`:
/// first-layer mixing weights `|hw1(s)|` (n_agents x embed), first-layer
/// bias `hb1(s)`, second-layer mixing weights `|hw2(s)|` (embed), and a
/// final bias from a small two-layer subnetwork `hv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmixMixer {
    pub(crate) n_agents: usize,
    pub(crate) state_dim: usize,
    pub(crate) embed: usize,
    pub(crate) hw1_w: Vec<f64>,
    pub(crate) hw1_b: Vec<f64>,
    pub(crate) hb1_w: Vec<f64>,
    pub(crate) hb1_b: Vec<f64>,
    pub(crate) hw2_w: Vec<f64>,
    pub(crate) hw2_b: Vec<f64>,
    pub(crate) hv1_w: Vec<f64>,
    pub(crate) hv1_b: Vec<f64>,
    pub(crate) hv2_w: Vec<f64>,
    pub(crate) hv2_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mixer {
    VdnSum,
    QmixMono(QmixMixer),
}

/// Intermediates from [`Mixer::mix_cached`].
#[derive(Debug, Clone)]
pub struct MixCache {
    qs: Vec<f64>,
    state: Vec<f64>,
    w1_raw: Vec<f64>,
    w1: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
    w2_raw: Vec<f64>,
    w2: Vec<f64>,
    hv_pre: Vec<f64>,
    hv_act: Vec<f64>,
}

/// Gradient accumulator matching [`QmixMixer`]'s tensors; empty for VDN.
#[derive(Debug, Clone)]
pub struct MixerGrads {
    pub(crate) tensors: Vec<Vec<f64>>,
}

impl MixerGrads {
    pub fn zeros(mixer: &Mixer) -> Self {
        let tensors = match mixer {
            Mixer::VdnSum => Vec::new(),
            Mixer::QmixMono(m) => m
                .tensor_views()
                .into_iter()
                .map(|(_, t)| alloc::vec![0.0; t.len()])
                .collect(),
        };
        Self { tensors }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl QmixMixer {
    pub fn init(n_agents: usize, state_dim: usize, embed: usize, rng: &mut dyn RngCore) -> Self {
        let (hw1_w, hw1_b) = init_layer(n_agents * embed, state_dim, rng);
        let (hb1_w, hb1_b) = init_layer(embed, state_dim, rng);
        let (hw2_w, hw2_b) = init_layer(embed, state_dim, rng);
        let (hv1_w, hv1_b) = init_layer(embed, state_dim, rng);
        let (hv2_w, hv2_b) = init_layer(1, embed, rng);
        Self {
            n_agents,
            state_dim,
            embed,
            hw1_w,
            hw1_b,
            hb1_w,
            hb1_b,
            hw2_w,
            hw2_b,
            hv1_w,
            hv1_b,
            hv2_w,
            hv2_b,
        }
    }

    /// Tensors in canonical (flatten) order.
    pub(crate) fn tensor_views(&self) -> Vec<(&'static str, &[f64])> {
        alloc::vec![
            ("mixer.hw1.w", &self.hw1_w[..]),
            ("mixer.hw1.b", &self.hw1_b[..]),
            ("mixer.hb1.w", &self.hb1_w[..]),
            ("mixer.hb1.b", &self.hb1_b[..]),
            ("mixer.hw2.w", &self.hw2_w[..]),
            ("mixer.hw2.b", &self.hw2_b[..]),
            ("mixer.hv1.w", &self.hv1_w[..]),
            ("mixer.hv1.b", &self.hv1_b[..]),
            ("mixer.hv2.w", &self.hv2_w[..]),
            ("mixer.hv2.b", &self.hv2_b[..]),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        alloc::vec![
            ("mixer.hw1.w", &mut self.hw1_w),
            ("mixer.hw1.b", &mut self.hw1_b),
            ("mixer.hb1.w", &mut self.hb1_w),
            ("mixer.hb1.b", &mut self.hb1_b),
            ("mixer.hw2.w", &mut self.hw2_w),
            ("mixer.hw2.b", &mut self.hw2_b),
            ("mixer.hv1.w", &mut self.hv1_w),
            ("mixer.hv1.b", &mut self.hv1_b),
            ("mixer.hv2.w", &mut self.hv2_w),
            ("mixer.hv2.b", &mut self.hv2_b),
        ]
    }
}

impl Mixer {
    pub fn init(
        kind: MixerKind,
        n_agents: usize,
        state_dim: usize,
        embed: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        match kind {
            MixerKind::VdnSum => Mixer::VdnSum,
            MixerKind::QmixMono => Mixer::QmixMono(QmixMixer::init(n_agents, state_dim, embed, rng)),
        }
    }

    pub fn kind(&self) -> MixerKind {
        match self {
            Mixer::VdnSum => MixerKind::VdnSum,
            Mixer::QmixMono(_) => MixerKind::QmixMono,
        }
    }

    /// Team value for the given per-agent chosen Q-values and global state.
    pub fn mix(&self, chosen_qs: &[f64], state: &[f64]) -> Result<f64> {
        Ok(self.mix_cached(chosen_qs, state)?.0)
    }

    pub fn mix_cached(&self, chosen_qs: &[f64], state: &[f64]) -> Result<(f64, MixCache)> {
        match self {
            Mixer::VdnSum => {
                let qtot = chosen_qs.iter().sum();
                Ok((
                    qtot,
                    MixCache {
                        qs: chosen_qs.to_vec(),
                        state: Vec::new(),
                        w1_raw: Vec::new(),
                        w1: Vec::new(),
                        h_pre: Vec::new(),
                        h: Vec::new(),
                        w2_raw: Vec::new(),
                        w2: Vec::new(),
                        hv_pre: Vec::new(),
                        hv_act: Vec::new(),
                    },
                ))
            }
            Mixer::QmixMono(m) => {
                if chosen_qs.len() != m.n_agents {
                    return Err(CoreError::DimensionMismatch {
                        what: "chosen q-values",
                        expected: m.n_agents,
                        got: chosen_qs.len(),
                    });
                }
                if state.len() != m.state_dim {
                    return Err(CoreError::DimensionMismatch {
                        what: "global state",
                        expected: m.state_dim,
                        got: state.len(),
                    });
                }
                let e = m.embed;
                let w1_raw = matvec(&m.hw1_w, &m.hw1_b, state, m.n_agents * e, m.state_dim);
                let w1: Vec<f64> = w1_raw.iter().map(|&x| libm::fabs(x)).collect();
                let b1 = matvec(&m.hb1_w, &m.hb1_b, state, e, m.state_dim);
                let mut h_pre = b1;
                for (i, &q) in chosen_qs.iter().enumerate() {
                    let row = &w1[i * e..(i + 1) * e];
                    for (hp, wij) in h_pre.iter_mut().zip(row) {
                        *hp += q * wij;
                    }
                }
                let h: Vec<f64> = h_pre.iter().map(|&x| elu(x)).collect();
                let w2_raw = matvec(&m.hw2_w, &m.hw2_b, state, e, m.state_dim);
                let w2: Vec<f64> = w2_raw.iter().map(|&x| libm::fabs(x)).collect();
                let hv_pre = matvec(&m.hv1_w, &m.hv1_b, state, e, m.state_dim);
                let hv_act: Vec<f64> = hv_pre.iter().map(|&x| elu(x)).collect();
                let v = matvec(&m.hv2_w, &m.hv2_b, &hv_act, 1, e)[0];
                let qtot = h.iter().zip(&w2).map(|(a, b)| a * b).sum::<f64>() + v;
                Ok((
                    qtot,
                    MixCache {
                        qs: chosen_qs.to_vec(),
                        state: state.to_vec(),
                        w1_raw,
                        w1,
                        h_pre,
                        h,
                        w2_raw,
                        w2,
                        hv_pre,
                        hv_act,
                    },
                ))
            }
        }
    }

    /// Accumulate parameter gradients and the per-agent derivative
    /// `d qtot / d q_i` scaled by `dqtot`.
    pub fn backward(
        &self,
        cache: &MixCache,
        dqtot: f64,
        grads: &mut MixerGrads,
        dqs: &mut [f64],
    ) {
        match self {
            Mixer::VdnSum => {
                for d in dqs.iter_mut() {
                    *d += dqtot;
                }
            }
            Mixer::QmixMono(m) => {
                let e = m.embed;
                let s = &cache.state;
                // Tensor order must match tensor_views().
                let [ghw1_w, ghw1_b, ghb1_w, ghb1_b, ghw2_w, ghw2_b, ghv1_w, ghv1_b, ghv2_w, ghv2_b] =
                    &mut grads.tensors[..]
                else {
                    panic!("mixer grads shape mismatch");
                };

                // Final bias subnetwork.
                ghv2_b[0] += dqtot;
                for j in 0..e {
                    ghv2_w[j] += dqtot * cache.hv_act[j];
                    let dpre = dqtot * m.hv2_w[j] * elu_prime(cache.hv_pre[j]);
                    if dpre == 0.0 {
                        continue;
                    }
                    ghv1_b[j] += dpre;
                    for (g, sk) in ghv1_w[j * m.state_dim..(j + 1) * m.state_dim]
                        .iter_mut()
                        .zip(s)
                    {
                        *g += dpre * sk;
                    }
                }

                // Second mixing layer: qtot = sum_j h[j] * |w2_raw[j]| + v.
                for j in 0..e {
                    let dw2 = dqtot * cache.h[j] * sign(cache.w2_raw[j]);
                    if dw2 != 0.0 {
                        ghw2_b[j] += dw2;
                        for (g, sk) in ghw2_w[j * m.state_dim..(j + 1) * m.state_dim]
                            .iter_mut()
                            .zip(s)
                        {
                            *g += dw2 * sk;
                        }
                    }
                }

                // First mixing layer.
                for j in 0..e {
                    let dh_pre = dqtot * cache.w2[j] * elu_prime(cache.h_pre[j]);
                    if dh_pre == 0.0 {
                        continue;
                    }
                    ghb1_b[j] += dh_pre;
                    for (g, sk) in ghb1_w[j * m.state_dim..(j + 1) * m.state_dim]
                        .iter_mut()
                        .zip(s)
                    {
                        *g += dh_pre * sk;
                    }
                    for (i, dq) in dqs.iter_mut().enumerate() {
                        let idx = i * e + j;
                        *dq += dh_pre * cache.w1[idx];
                        let dw1 = dh_pre * cache.qs[i] * sign(cache.w1_raw[idx]);
                        if dw1 != 0.0 {
                            ghw1_b[idx] += dw1;
                            for (g, sk) in ghw1_w[idx * m.state_dim..(idx + 1) * m.state_dim]
                                .iter_mut()
                                .zip(s)
                            {
                                *g += dw1 * sk;
                            }
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn flatten_into(&self, out: &mut Vec<f64>) {
        if let Mixer::QmixMono(m) = self {
            for (_, t) in m.tensor_views() {
                out.extend_from_slice(t);
            }
        }
    }

    pub(crate) fn assign_from_flat(&mut self, flat: &[f64]) -> usize {
        match self {
            Mixer::VdnSum => 0,
            Mixer::QmixMono(m) => {
                let mut off = 0;
                for (_, t) in m.tensors_mut() {
                    let len = t.len();
                    t.copy_from_slice(&flat[off..off + len]);
                    off += len;
                }
                off
            }
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        match self {
            Mixer::VdnSum => 0,
            Mixer::QmixMono(m) => m.tensor_views().iter().map(|(_, t)| t.len()).sum(),
        }
    }
}

impl MixerGrads {
    pub(crate) fn flatten_into(&self, out: &mut Vec<f64>) {
        for t in &self.tensors {
            out.extend_from_slice(t);
        }
    }
}
