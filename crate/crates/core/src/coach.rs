//! The virtual coach: schedules the training crash rate.
//!
//! The coach holds the current crash rate `alpha_t`, observes a performance
//! value `e_t` in [0, 1] once per round, and produces `alpha_{t+1}` under one
//! of three strategies:
//!
//! * fixed — the rate never changes;
//! * curriculum — the rate grows linearly from zero up to a cap;
//! * adaptive — `alpha_{t+1} = alpha_t + rho * (I(e_t >= beta) - alpha_t)`,
//!   raising difficulty when performance clears the threshold `beta` and
//!   relaxing it otherwise.
//!
//! Fixed and curriculum are the degenerate cases of the adaptive family
//! (`rho = 0`, resp. a constant additive step).

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Crash-rate scheduling rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoachStrategy {
    /// Keep the configured rate for the whole run.
    Fixed { alpha: f64 },
    /// Start at zero and add `delta_alpha` each round, capped at `alpha_max`.
    Curriculum { delta_alpha: f64, alpha_max: f64 },
    /// Threshold-driven update with step size `rho`.
    Adaptive { beta: f64, rho: f64, alpha_init: f64 },
}

impl CoachStrategy {
    /// The crash rate for the first round.
    pub fn initial_alpha(&self) -> f64 {
        match *self {
            CoachStrategy::Fixed { alpha } => alpha,
            CoachStrategy::Curriculum { .. } => 0.0,
            CoachStrategy::Adaptive { alpha_init, .. } => alpha_init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(CoreError::InvalidParameter {
                    name,
                    detail: format!("must be in [0, 1], got {v}"),
                })
            }
        };
        match *self {
            CoachStrategy::Fixed { alpha } => prob("alpha", alpha),
            CoachStrategy::Curriculum {
                delta_alpha,
                alpha_max,
            } => {
                prob("delta_alpha", delta_alpha)?;
                prob("alpha_max", alpha_max)
            }
            CoachStrategy::Adaptive {
                beta,
                rho,
                alpha_init,
            } => {
                prob("beta", beta)?;
                prob("alpha_init", alpha_init)?;
                if rho > 0.0 && rho <= 1.0 {
                    Ok(())
                } else {
                    Err(CoreError::InvalidParameter {
                        name: "rho",
                        detail: format!("must be in (0, 1], got {rho}"),
                    })
                }
            }
        }
    }
}

/// The coach's evolving state across rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoachState {
    /// Current crash rate, always in [0, 1].
    pub alpha_t: f64,
    /// Completed coach rounds.
    pub round: usize,
    /// Last observed performance, if any.
    pub last_e: Option<f64>,
}

impl CoachState {
    pub fn new(strategy: &CoachStrategy) -> Self {
        Self {
            alpha_t: strategy.initial_alpha(),
            round: 0,
            last_e: None,
        }
    }

    /// Observe `e_t`, advance to the next round and return the new rate.
    pub fn observe(&mut self, strategy: &CoachStrategy, e_t: f64) -> Result<f64> {
        let next = next_crash_rate(strategy, self, e_t)?;
        self.alpha_t = next;
        self.round += 1;
        self.last_e = Some(e_t);
        Ok(next)
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CoreError::InvalidParameter {
            name,
            detail: format!("must be in [0, 1], got {v}"),
        })
    }
}

/// Compute the crash rate for the next round from the current state and the
/// observed performance `e_t`.
pub fn next_crash_rate(strategy: &CoachStrategy, state: &CoachState, e_t: f64) -> Result<f64> {
    check_unit("e_t", e_t)?;
    check_unit("alpha_t", state.alpha_t)?;
    let alpha = state.alpha_t;
    let next = match *strategy {
        CoachStrategy::Fixed { .. } => alpha,
        CoachStrategy::Curriculum {
            delta_alpha,
            alpha_max,
        } => (alpha + delta_alpha).min(alpha_max),
        CoachStrategy::Adaptive { beta, rho, .. } => {
            let indicator = if e_t >= beta { 1.0 } else { 0.0 };
            alpha + rho * (indicator - alpha)
        }
    };
    // The update keeps alpha in [0, 1] analytically; the clamp only guards
    // floating-point drift.
    Ok(next.clamp(0.0, 1.0))
}

/// Closed form of the adaptive trajectory when the threshold indicator is
/// constant over all `t` rounds: the rate decays geometrically toward 1 when
/// performance always clears the threshold, toward 0 when it never does.
pub fn alpha_trajectory_closed_form(rho: f64, alpha_init: f64, t: u32, always_above: bool) -> f64 {
    let decay = libm::pow(1.0 - rho, f64::from(t));
    if always_above {
        1.0 - decay * (1.0 - alpha_init)
    } else {
        decay * alpha_init
    }
}
