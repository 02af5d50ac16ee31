//! Shipped training recipes.
//!
//! The ImageNet presets share one recipe: cosine annealing
//! with 5 warmup epochs, max LR 0.4, label smoothing 0.1, the multi-scale
//! variable-batch sampler over `{128, 192, 224, 288, 320}` squared anchored at
//! 224. `synthetic` drives the built-in toy task.

use crate::config::{BatchRounding, Resolution, ResolutionSet, SamplerConfig, Strategy};
use crate::error::{Error, Result};
use crate::trainer::{Architecture, Model, SyntheticDataset, SyntheticTask, TaskConfig, TrainerConfig};

/// ImageNet-1k training set size.
pub const IMAGENET_TRAIN_SIZE: u64 = 1_281_167;

pub const PRESET_NAMES: &[&str] = &[
    "resnet50",
    "resnet50_adv",
    "mobilenetv1",
    "mobilenetv2",
    "mobilenetv3",
    "synthetic",
];

fn imagenet(epochs: u64, batch: u64, weight_decay: f64) -> (SamplerConfig, TrainerConfig) {
    let sampler = SamplerConfig {
        strategy: Strategy::MscVbs,
        dataset_size: IMAGENET_TRAIN_SIZE,
        base_batch: batch,
        base_resolution: Resolution::square(224),
        resolutions: ResolutionSet::standard(),
        epochs,
        world_size: 1,
        seed: 0,
        drop_last: true,
        batch_rounding: BatchRounding::MultipleOfWorld,
        min_batch: 1,
        video: None,
    };
    let trainer = TrainerConfig {
        max_lr: 0.4,
        warmup_epochs: 5,
        total_epochs: epochs,
        min_lr: 0.0,
        momentum: 0.9,
        weight_decay,
        label_smoothing: 0.1,
        ema_decay: 0.9995,
    };
    (sampler, trainer)
}

/// Sampler and trainer settings for a named preset.
pub fn load_preset(name: &str) -> Result<(SamplerConfig, TrainerConfig)> {
    Ok(match name {
        "resnet50" => imagenet(150, 1024, 1e-4),
        "resnet50_adv" => imagenet(600, 1024, 1e-4),
        // the MobileNetv1 table lists no LR; the shared 0.4 is used
        "mobilenetv1" => imagenet(300, 512, 4e-5),
        "mobilenetv2" => imagenet(300, 1024, 4e-5),
        "mobilenetv3" => imagenet(300, 2048, 4e-5),
        "synthetic" => synthetic(),
        other => return Err(Error::UnknownPreset(other.to_string())),
    })
}

fn synthetic() -> (SamplerConfig, TrainerConfig) {
    let sampler = SamplerConfig {
        strategy: Strategy::MscVbs,
        dataset_size: 10_000,
        base_batch: 64,
        base_resolution: Resolution::square(224),
        resolutions: ResolutionSet::standard(),
        epochs: 30,
        world_size: 1,
        seed: 0,
        drop_last: false,
        batch_rounding: BatchRounding::MultipleOfWorld,
        min_batch: 1,
        video: None,
    };
    let trainer = TrainerConfig {
        max_lr: 0.1,
        warmup_epochs: 2,
        total_epochs: 30,
        min_lr: 0.0,
        momentum: 0.9,
        weight_decay: 1e-4,
        label_smoothing: 0.1,
        ema_decay: 0.999,
    };
    (sampler, trainer)
}

/// The toy learning problem behind `synthetic` and the `train` command.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecipe {
    pub task: TaskConfig,
    pub architecture: Architecture,
    pub holdout_size: usize,
    pub init_seed: u64,
}

/// Mixed into the run seed so the holdout set never equals the training set.
pub const HOLDOUT_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

impl SyntheticRecipe {
    /// Training set of `n` samples and the matching holdout set.
    pub fn datasets(&self, n: usize, seed: u64) -> Result<(SyntheticDataset, SyntheticDataset)> {
        let task = SyntheticTask::new(self.task.clone())?;
        Ok((task.sample(n, seed), task.sample(self.holdout_size, seed ^ HOLDOUT_SALT)))
    }

    pub fn model(&self, data: &SyntheticDataset) -> Model {
        Model::new(self.architecture, data.input_dim(), data.classes(), self.init_seed)
    }
}

impl Default for SyntheticRecipe {
    fn default() -> Self {
        Self {
            task: TaskConfig::default(),
            architecture: Architecture::Mlp { hidden: 32 },
            holdout_size: 2000,
            init_seed: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    #[test]
    fn resnet50_recipe() {
        let (s, t) = load_preset("resnet50").unwrap();
        assert_eq!((s.epochs, s.base_batch), (150, 1024));
        assert_eq!((t.max_lr, t.warmup_epochs, t.weight_decay, t.label_smoothing), (0.4, 5, 1e-4, 0.1));
        assert_eq!(s.dataset_size, 1_281_167);
    }

    #[test]
    fn mobilenetv2_recipe() {
        let (s, t) = load_preset("mobilenetv2").unwrap();
        assert_eq!((s.epochs, s.base_batch, t.weight_decay), (300, 1024, 4e-5));
    }

    #[test]
    fn unknown_preset() {
        assert_eq!(load_preset("bogus").unwrap_err().code(), "UNKNOWN_PRESET");
    }

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let (s, t) = load_preset(name).unwrap();
            validate_config(s).unwrap();
            t.validate().unwrap();
        }
    }
}
