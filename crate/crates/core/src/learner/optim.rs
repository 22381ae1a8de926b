//! RMSProp over the flattened online parameter vector.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Square-gradient moving-average optimiser:
/// `v <- decay * v + (1 - decay) * g^2`, `p <- p - lr * g / (sqrt(v) + eps)`.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    sq_avg: Vec<f64>,
}

impl RmsProp {
    pub fn new(learning_rate: f64, decay: f64, epsilon: f64, param_count: usize) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            sq_avg: alloc::vec![0.0; param_count],
        }
    }

    /// Apply one update in place. The whole step is validated before any
    /// parameter is written, so a non-finite update leaves `params` intact.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        assert_eq!(params.len(), self.sq_avg.len());
        assert_eq!(grads.len(), self.sq_avg.len());

        let mut updated = Vec::with_capacity(params.len());
        let mut sq = Vec::with_capacity(params.len());
        for ((&p, &g), &v) in params.iter().zip(grads).zip(&self.sq_avg) {
            let v_next = self.decay * v + (1.0 - self.decay) * g * g;
            let p_next = p - self.learning_rate * g / (libm::sqrt(v_next) + self.epsilon);
            if !p_next.is_finite() {
                return Err(CoreError::NumericFailure {
                    context: "optimizer update".into(),
                });
            }
            updated.push(p_next);
            sq.push(v_next);
        }
        params.copy_from_slice(&updated);
        self.sq_avg.copy_from_slice(&sq);
        Ok(())
    }
}
