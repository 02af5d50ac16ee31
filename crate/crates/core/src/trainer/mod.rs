//! A small numerical trainer used to exercise the samplers and SET end to end.

mod data;
mod loss;
mod lr;
mod model;
mod optim;
mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use data::{pool_to_resolution, SyntheticDataset, SyntheticTask, TaskConfig};
pub use loss::{label_smoothed_ce, smoothed_ce_minimum, softmax, LossGrad};
pub use lr::{cosine_lr, WarmupCosine};
pub use model::{read_params, write_params, Architecture, BatchGrad, Model, Prediction, PARAMS_FORMAT_VERSION};
pub use optim::{ema_update, sgd_momentum_step};
pub use run::{train, train_with_state, EpochStats, RunReport, RUN_SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub max_lr: f64,
    pub warmup_epochs: u64,
    pub total_epochs: u64,
    pub min_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    pub ema_decay: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            max_lr: 0.4,
            warmup_epochs: 5,
            total_epochs: 150,
            min_lr: 0.0,
            momentum: 0.9,
            weight_decay: 1e-4,
            label_smoothing: 0.1,
            ema_decay: 0.9995,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTrainerConfig(msg));
        if self.warmup_epochs >= self.total_epochs {
            return bad(format!(
                "warmup_epochs {} must be below total_epochs {}",
                self.warmup_epochs, self.total_epochs
            ));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!("label_smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return bad(format!("ema_decay {} outside [0, 1]", self.ema_decay));
        }
        let reals = [self.max_lr, self.min_lr, self.momentum, self.weight_decay];
        if reals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("learning rates, momentum and weight decay must be finite and non-negative".into());
        }
        Ok(())
    }
}
