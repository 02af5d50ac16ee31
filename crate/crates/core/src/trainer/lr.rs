use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::TrainerConfig;

/// Linear warmup from 0 to `max_lr`, then cosine annealing to `min_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupCosine {
    pub max_lr: f64,
    pub min_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl WarmupCosine {
    pub fn from_config(config: &TrainerConfig, steps_per_epoch: u64) -> Self {
        Self {
            max_lr: config.max_lr,
            min_lr: config.min_lr,
            warmup_steps: config.warmup_epochs * steps_per_epoch,
            total_steps: config.total_epochs * steps_per_epoch,
        }
    }

    pub fn at(&self, step: u64) -> Result<f64> {
        if self.total_steps == 0 || step > self.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        if step < self.warmup_steps {
            return Ok(self.max_lr * step as f64 / self.warmup_steps as f64);
        }
        let span = self.total_steps - self.warmup_steps;
        let done = step - self.warmup_steps;
        // endpoints and midpoint are returned exactly rather than through cos()
        if done == 0 {
            return Ok(self.max_lr);
        }
        if done == span {
            return Ok(self.min_lr);
        }
        let mid = 0.5 * (self.max_lr + self.min_lr);
        if 2 * done == span {
            return Ok(mid);
        }
        let progress = done as f64 / span as f64;
        let amp = 0.5 * (self.max_lr - self.min_lr);
        Ok(mid + amp * (PI * progress).cos())
    }
}

pub fn cosine_lr(step: u64, steps_per_epoch: u64, config: &TrainerConfig) -> Result<f64> {
    WarmupCosine::from_config(config, steps_per_epoch).at(step)
}
