// Copyright 2026 The ctxalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the learning rate does once warmup is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear decay from `base_lr` at the end of warmup to zero at `total_steps`.
    LinearDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub schedule: LrSchedule,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            base_lr: 5e-5,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            warmup_steps: 0,
            total_steps: 0,
            schedule: LrSchedule::Constant,
        }
    }
}

/// Bias-corrected Adam with a linear warmup learning rate.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Result<Self> {
        if config.warmup_steps > config.total_steps {
            return Err(Error::Invalid(format!(
                "warmup_steps {} exceeds total_steps {}",
                config.warmup_steps, config.total_steps
            )));
        }
        Ok(AdamState {
            config,
            step: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        })
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first_moment, &self.second_moment)
    }

    /// Learning rate for the current step (`step >= 1`).
    pub fn warmup_lr(&self) -> f64 {
        lr_at(&self.config, self.step)
    }

    /// Applies one update in place and returns the learning rate used.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<f64> {
        if params.len() != self.first_moment.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first_moment.len(),
                found: params.len(),
            });
        }
        if grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                found: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at index {i}")));
        }
        self.step += 1;
        let lr = self.warmup_lr();
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(lr)
    }
}

/// Learning rate at 1-based `step`: `base·step/warmup` during warmup,
/// then `base` (or the decayed value under [`LrSchedule::LinearDecay`]).
pub fn lr_at(config: &AdamConfig, step: u64) -> f64 {
    let warmup = config.warmup_steps;
    if warmup > 0 && step <= warmup {
        // Ratio first: exactly `base` at the end of warmup, never above it.
        return config.base_lr * (step as f64 / warmup as f64);
    }
    match config.schedule {
        LrSchedule::Constant => config.base_lr,
        LrSchedule::LinearDecay => {
            let span = config.total_steps.saturating_sub(warmup);
            if span == 0 {
                return config.base_lr;
            }
            let left = config.total_steps.saturating_sub(step) as f64;
            config.base_lr * left / span as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(warmup: u64, total: u64) -> AdamConfig {
        AdamConfig {
            warmup_steps: warmup,
            total_steps: total,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn warmup_is_linear_then_constant() {
        let c = cfg(10, 100);
        assert_eq!(lr_at(&c, 5), 2.5e-5);
        assert_eq!(lr_at(&c, 10), 5e-5);
        assert_eq!(lr_at(&c, 50), 5e-5);
        assert_eq!(lr_at(&cfg(0, 100), 1), 5e-5);
    }

    #[test]
    fn linear_decay_reaches_zero_at_total() {
        let c = AdamConfig {
            schedule: LrSchedule::LinearDecay,
            ..cfg(10, 110)
        };
        assert_eq!(lr_at(&c, 10), 5e-5);
        assert!((lr_at(&c, 60) - 2.5e-5).abs() < 1e-18);
        assert_eq!(lr_at(&c, 110), 0.0);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        let mut st = AdamState::new(cfg(0, 10), 3).unwrap();
        let mut p = vec![0.0; 3];
        let lr = st.update(&mut p, &[1.0; 3]).unwrap();
        for x in p {
            assert!((x + lr / (1.0 + 1e-9)).abs() < 1e-20);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(cfg(0, 10), 2).unwrap();
        let mut p = vec![1.5, -2.0];
        st.update(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(st.moments().0, &[0.0, 0.0]);
    }

    #[test]
    fn guards() {
        let mut st = AdamState::new(cfg(0, 10), 2).unwrap();
        let mut p = vec![0.0; 2];
        assert!(matches!(
            st.update(&mut p, &[f64::INFINITY, 0.0]),
            Err(Error::Numeric(_))
        ));
        assert!(st.update(&mut p, &[0.0]).is_err());
        assert!(AdamState::new(cfg(11, 10), 1).is_err());
    }
}
