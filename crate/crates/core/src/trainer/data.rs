//! Synthetic Gaussian-mixture classification on square feature grids.
//!
//! Each class prototype is the sum of a coarse pattern (constant over
//! `coarse_cells x coarse_cells` blocks) and a fine per-cell pattern. A sample
//! is its prototype plus Gaussian noise; a fraction of samples are blends of
//! two prototypes and stay ambiguous. Inputs are average-pooled to the
//! sampled resolution and spread back to the full grid, so low resolutions
//! keep the coarse signal and lose the fine one.

use serde::{Deserialize, Serialize};

use crate::config::Resolution;
use crate::error::{Error, Result};
use crate::rng::{SeededRng, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub classes: usize,
    /// Side of the feature grid; the model input has `grid * grid` entries.
    pub grid: usize,
    pub coarse_cells: usize,
    pub coarse_scale: f64,
    pub fine_scale: f64,
    /// Per-sample noise std is `noise * (1 + noise_spread * u)`, `u ~ U[0,1)`.
    pub noise: f64,
    pub noise_spread: f64,
    /// Fraction of samples blended with a second class.
    pub ambiguous_fraction: f64,
    /// Per-epoch input jitter applied during training.
    pub aug_noise: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            grid: 10,
            coarse_cells: 2,
            coarse_scale: 0.5,
            fine_scale: 0.5,
            noise: 1.0,
            noise_spread: 1.0,
            ambiguous_fraction: 0.1,
            aug_noise: 0.3,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    config: TaskConfig,
    prototypes: Vec<f64>,
}

impl SyntheticTask {
    pub fn new(config: TaskConfig) -> Result<Self> {
        if config.classes < 2 || config.grid == 0 || config.coarse_cells == 0 || config.coarse_cells > config.grid {
            return Err(Error::Parse("invalid synthetic task dimensions".into()));
        }
        let g = config.grid;
        let c = config.coarse_cells;
        let mut prototypes = Vec::with_capacity(config.classes * g * g);
        for k in 0..config.classes {
            let mut rng = SeededRng::new(config.seed, StreamKey::new(0, k as u64, "prototype"));
            let coarse: Vec<f64> = (0..c * c).map(|_| rng.standard_normal()).collect();
            for i in 0..g {
                for j in 0..g {
                    let block = (i * c / g) * c + j * c / g;
                    prototypes.push(config.coarse_scale * coarse[block] + config.fine_scale * rng.standard_normal());
                }
            }
        }
        Ok(Self { config, prototypes })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    fn prototype(&self, class: usize) -> &[f64] {
        let d = self.config.grid * self.config.grid;
        &self.prototypes[class * d..(class + 1) * d]
    }

    /// `n` samples with class-balanced labels; regenerable from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> SyntheticDataset {
        let k = self.config.classes;
        let d = self.config.grid * self.config.grid;
        let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        SeededRng::new(seed, StreamKey::new(0, 0, "labels")).shuffle(&mut labels);
        let mut features = Vec::with_capacity(n * d);
        for (i, &y) in labels.iter().enumerate() {
            let mut rng = SeededRng::new(seed, StreamKey::new(0, i as u64, "sample"));
            let sigma = self.config.noise * (1.0 + self.config.noise_spread * rng.next_f64());
            let blend = if rng.next_f64() < self.config.ambiguous_fraction {
                // partner class differs from y; weight on y in [0.5, 0.65)
                let other = (y + 1 + rng.below(k as u64 - 1).unwrap_or(0) as usize) % k;
                Some((other, 0.5 + 0.15 * rng.next_f64()))
            } else {
                None
            };
            let own = self.prototype(y);
            for (cell, &p) in own.iter().enumerate() {
                let mean = match blend {
                    Some((o, w)) => w * p + (1.0 - w) * self.prototype(o)[cell],
                    None => p,
                };
                features.push(mean + sigma * rng.standard_normal());
            }
        }
        SyntheticDataset {
            grid: self.config.grid,
            classes: k,
            aug_noise: self.config.aug_noise,
            seed,
            features,
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    grid: usize,
    classes: usize,
    aug_noise: f64,
    seed: u64,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn input_dim(&self) -> usize {
        self.grid * self.grid
    }

    pub fn label(&self, id: u32) -> usize {
        self.labels[id as usize]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self, id: u32) -> &[f64] {
        let d = self.input_dim();
        &self.features[id as usize * d..(id as usize + 1) * d]
    }

    /// Model input for sample `id` at `resolution`. With `augment_epoch`,
    /// per-epoch jitter (keyed by epoch and id) is added before pooling.
    pub fn input(&self, id: u32, resolution: Resolution, augment_epoch: Option<u64>) -> Vec<f64> {
        let mut x = self.features(id).to_vec();
        if let Some(epoch) = augment_epoch.filter(|_| self.aug_noise > 0.0) {
            let mut rng = SeededRng::new(self.seed, StreamKey::new(epoch, u64::from(id), "aug"));
            for v in &mut x {
                *v += self.aug_noise * rng.standard_normal();
            }
        }
        pool_to_resolution(&x, self.grid, resolution)
    }
}

/// Averages a `side x side` grid over `height x width` buckets (clamped to
/// the grid) and writes each bucket mean back to its cells.
pub fn pool_to_resolution(grid: &[f64], side: usize, resolution: Resolution) -> Vec<f64> {
    let rh = (resolution.height as usize).clamp(1, side);
    let rw = (resolution.width as usize).clamp(1, side);
    if rh == side && rw == side {
        return grid.to_vec();
    }
    let bucket = |i: usize, j: usize| (i * rh / side) * rw + j * rw / side;
    let mut sums = vec![0.0; rh * rw];
    let mut counts = vec![0usize; rh * rw];
    for i in 0..side {
        for j in 0..side {
            let b = bucket(i, j);
            sums[b] += grid[i * side + j];
            counts[b] += 1;
        }
    }
    (0..side * side)
        .map(|cell| {
            let b = bucket(cell / side, cell % side);
            sums[b] / counts[b] as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_full_resolution_is_identity() {
        let g: Vec<f64> = (0..16).map(f64::from).collect();
        assert_eq!(pool_to_resolution(&g, 4, Resolution::square(4)), g);
        assert_eq!(pool_to_resolution(&g, 4, Resolution::square(64)), g);
    }

    #[test]
    fn pooling_to_one_bucket_is_the_mean() {
        let g: Vec<f64> = (0..16).map(f64::from).collect();
        assert!(pool_to_resolution(&g, 4, Resolution::square(1)).iter().all(|&v| v == 7.5));
    }

    #[test]
    fn pooling_two_by_two() {
        let g: Vec<f64> = (0..16).map(f64::from).collect();
        let p = pool_to_resolution(&g, 4, Resolution::square(2));
        // top-left block holds 0, 1, 4, 5
        assert_eq!(p[0], 2.5);
        assert_eq!(p[5], 2.5);
        assert_eq!(p[15], 12.5);
    }

    #[test]
    fn labels_are_balanced_and_regenerable() {
        let task = SyntheticTask::new(TaskConfig::default()).unwrap();
        let a = task.sample(1003, 7);
        let mut counts = vec![0usize; 10];
        for &l in a.labels() {
            counts[l] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        assert_eq!(a, task.sample(1003, 7));
        assert_ne!(a, task.sample(1003, 8));
    }

    #[test]
    fn augmentation_depends_on_epoch() {
        let task = SyntheticTask::new(TaskConfig::default()).unwrap();
        let d = task.sample(10, 1);
        let r = Resolution::square(10);
        assert_eq!(d.input(3, r, None), d.features(3));
        assert_eq!(d.input(3, r, Some(1)), d.input(3, r, Some(1)));
        assert_ne!(d.input(3, r, Some(1)), d.input(3, r, Some(2)));
    }
}
