use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment accumulators for a list of parameter slices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(slot_lens: &[usize]) -> Self {
        Self {
            step: 0,
            first: slot_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: slot_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_params(params: &[&[T]]) -> Self {
        Self::new(&params.iter().map(|p| p.len()).collect::<Vec<_>>())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected ADAM update. Shapes are checked and every gradient
    /// must be finite before anything is mutated.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]], config: &AdamConfig) -> Result<(), TrainError> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(TrainError::Shape(format!(
                "{} parameter slots and {} gradient slots for {} optimizer slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.first).enumerate() {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(TrainError::Shape(format!(
                    "slot {i}: {} params, {} grads, {} moments",
                    p.len(),
                    g.len(),
                    m.len()
                )));
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(TrainError::NonFiniteGradient);
        }

        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
        let lr = T::lit(config.learning_rate);
        let eps = T::lit(config.epsilon);
        let one = T::one();
        let correction1 = one - b1.powi(t);
        let correction2 = one - b2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = b1 * m[k] + (one - b1) * gk;
                v[k] = b2 * v[k] + (one - b2) * gk * gk;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
