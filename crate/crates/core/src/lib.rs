//! Crash-robust cooperative multi-agent Q-learning at desk scale.
//!
//! The library models a team of agents in which each agent may crash at the
//! beginning of an episode (one independent Bernoulli draw per agent), a
//! coach that schedules the training crash rate from observed performance, a
//! deterministic grid-world testbed, and a from-scratch value-decomposition
//! Q-learner with manual backpropagation.
//!
//! Everything is deterministic given a master seed, and all arithmetic is
//! 64-bit so analytic gradients can be checked against finite differences.
//!
//! The crate is `no_std` (with `alloc`); file formats, CSV logging and the
//! command-line front end live in the companion `crashcoach-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod coach;
pub mod crash;
pub mod env;
pub mod error;
pub mod gridworld;
pub mod learner;
pub mod record;
pub mod rng;
pub mod trainer;

pub use error::{CoreError, Result};
