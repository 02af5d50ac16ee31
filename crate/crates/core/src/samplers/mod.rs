//! Per-epoch batch schedules for the single-scale, multi-scale and
//! variable-batch strategies, plus the video variant and rank sharding.

mod export;
mod plan;
mod shard;
mod video;

use serde::{Deserialize, Serialize};

use crate::config::{BatchRounding, Resolution};

pub use export::{
    read_schedule_jsonl, write_schedule_jsonl, ImportedSchedule, ScheduleWriter,
    SCHEDULE_SCHEMA_VERSION,
};
pub use plan::{
    plan_epoch, plan_msc_fbs, plan_msc_vbs, plan_shapes, plan_ssc_fbs, planner_for,
    EpochPlanner, ImagePlanner,
};
pub use shard::shard_for_rank;
pub use video::{plan_video_vbs, video_specs, VideoClipSpec, VideoPlanner};

pub type SampleId = u32;

/// Temporal shape of a video batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipShape {
    pub num_frames: u32,
    pub clips_per_video: u32,
}

/// One optimizer step's worth of input.
///
/// In an unsharded schedule `batch_size` counts ids across all replicas;
/// [`shard_for_rank`] divides it by the world size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub iteration: u64,
    pub resolution: Resolution,
    pub clip: Option<ClipShape>,
    pub batch_size: u64,
    pub sample_ids: Vec<SampleId>,
}

impl BatchPlan {
    /// Input elements per sample, excluding channels: `frames * clips * H * W`.
    pub fn sample_volume(&self) -> u64 {
        let temporal = self
            .clip
            .map_or(1, |c| u64::from(c.num_frames) * u64::from(c.clips_per_video));
        temporal * self.resolution.pixel_count()
    }
}

/// Id-free description of a plan; `len` is the number of ids it will hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanShape {
    pub iteration: u64,
    pub resolution: Resolution,
    pub clip: Option<ClipShape>,
    pub batch_size: u64,
    pub len: u64,
}

impl PlanShape {
    pub fn sample_volume(&self) -> u64 {
        let temporal = self
            .clip
            .map_or(1, |c| u64::from(c.num_frames) * u64::from(c.clips_per_video));
        temporal * self.resolution.pixel_count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub epoch: u64,
    pub plans: Vec<BatchPlan>,
    pub total_samples: u64,
    pub total_updates: u64,
}

impl EpochSchedule {
    pub fn new(epoch: u64, plans: Vec<BatchPlan>) -> Self {
        let total_samples = plans.iter().map(|p| p.sample_ids.len() as u64).sum();
        let total_updates = plans.len() as u64;
        Self {
            epoch,
            plans,
            total_samples,
            total_updates,
        }
    }

    pub fn resolutions(&self) -> impl Iterator<Item = Resolution> + '_ {
        self.plans.iter().map(|p| p.resolution)
    }
}

/// Rescales `base_batch` so that `batch * volume` stays at
/// `base_batch * base_volume`, using exact integer arithmetic.
pub fn scale_batch_by_volume(
    base_batch: u64,
    base_volume: u64,
    target_volume: u64,
    rounding: BatchRounding,
    min_batch: u64,
    world_size: u32,
) -> u64 {
    let num = u128::from(base_batch) * u128::from(base_volume);
    let den = u128::from(target_volume.max(1));
    let world = u64::from(world_size.max(1));
    let floor = (num / den) as u64;
    let rounded = match rounding {
        BatchRounding::Floor => floor,
        BatchRounding::Nearest => ((2 * num + den) / (2 * den)) as u64,
        BatchRounding::MultipleOfWorld => floor / world * world,
    };
    let clamped = rounded.max(min_batch).max(1);
    match rounding {
        BatchRounding::MultipleOfWorld => clamped.div_ceil(world) * world,
        _ => clamped,
    }
}

/// `b_t = b * H_base * W_base / (H_t * W_t)` under the given rounding rule,
/// clamped to at least `min_batch`.
pub fn scaled_batch_size(
    base_batch: u64,
    base_res: Resolution,
    target_res: Resolution,
    rounding: BatchRounding,
    min_batch: u64,
    world_size: u32,
) -> u64 {
    scale_batch_by_volume(
        base_batch,
        base_res.pixel_count(),
        target_res.pixel_count(),
        rounding,
        min_batch,
        world_size,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: fn(u32) -> Resolution = Resolution::square;

    #[test]
    fn scaled_batch_examples() {
        // 1024 * 102400 / 25600
        assert_eq!(
            scaled_batch_size(1024, R(320), R(160), BatchRounding::Floor, 1, 1),
            4096
        );
        assert_eq!(
            scaled_batch_size(1024, R(224), R(224), BatchRounding::MultipleOfWorld, 1, 1),
            1024
        );
        // 1024 * 50176 / 102400 = 501.76
        assert_eq!(
            scaled_batch_size(1024, R(224), R(320), BatchRounding::Floor, 1, 1),
            501
        );
        assert_eq!(
            scaled_batch_size(1024, R(224), R(320), BatchRounding::Nearest, 1, 1),
            502
        );
    }

    #[test]
    fn pixel_ratio_of_320_over_224_is_about_two() {
        let ratio = R(320).pixel_count() as f64 / R(224).pixel_count() as f64;
        assert!((ratio - 2.0408).abs() < 1e-4);
        // so a batch anchored at 224 roughly halves at 320
        let b = scaled_batch_size(256, R(224), R(320), BatchRounding::Floor, 1, 1);
        assert_eq!(b, 125);
    }

    #[test]
    fn multiple_of_world_rounds_down_and_clamps() {
        // 1024 * 50176 / 102400 = 501.76 -> 496 with world 8
        assert_eq!(
            scaled_batch_size(1024, R(224), R(320), BatchRounding::MultipleOfWorld, 8, 8),
            496
        );
        // tiny results clamp to min_batch, then up to a multiple of world
        assert_eq!(
            scaled_batch_size(4, R(16), R(320), BatchRounding::MultipleOfWorld, 3, 4),
            4
        );
        assert_eq!(
            scaled_batch_size(4, R(16), R(320), BatchRounding::Floor, 3, 4),
            3
        );
    }

    #[test]
    fn nearest_ties_round_up() {
        // 3 * 1 / 2 = 1.5
        assert_eq!(
            scale_batch_by_volume(3, 1, 2, BatchRounding::Nearest, 1, 1),
            2
        );
        assert_eq!(scale_batch_by_volume(3, 1, 2, BatchRounding::Floor, 1, 1), 1);
    }
}
