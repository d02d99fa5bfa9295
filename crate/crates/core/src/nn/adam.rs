//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::tensor::ParamTensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdamOutcome {
    Applied,
    /// A gradient was NaN or infinite; nothing was changed.
    SkippedNonFinite,
}

/// Optimizer state: first and second moments per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub config: AdamConfig,
    step: u64,
    skipped: u64,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            skipped: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Applies one update to `params` (always passed in the same order).
    pub fn step(&mut self, params: &mut [&mut ParamTensor<S>]) -> AdamOutcome {
        if params.iter().any(|p| p.grad.iter().any(|g| !g.is_finite())) {
            self.skipped += 1;
            return AdamOutcome::SkippedNonFinite;
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![S::zero(); p.len()]).collect();
            self.second = self.first.clone();
        }
        assert_eq!(
            self.first.len(),
            params.len(),
            "parameter list changed between steps"
        );

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = S::lit(1.0 - beta1.powi(t));
        let bc2 = S::lit(1.0 - beta2.powi(t));
        let (b1, b2) = (S::lit(beta1), S::lit(beta2));
        let (one_b1, one_b2) = (S::lit(1.0 - beta1), S::lit(1.0 - beta2));
        let (lr, eps) = (S::lit(lr), S::lit(eps));

        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for (((w, &g), m), v) in p
                .values
                .iter_mut()
                .zip(&p.grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        AdamOutcome::Applied
    }
}
