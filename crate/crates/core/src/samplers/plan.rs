use crate::config::{Resolution, Strategy, ValidConfig};
use crate::error::{Error, Result};
use crate::rng::{SeededRng, StreamKey};

use super::video::VideoPlanner;
use super::{scaled_batch_size, BatchPlan, ClipShape, EpochSchedule, PlanShape, SampleId};

/// Stream tag for the per-iteration resolution draw. Keyed on
/// `(epoch, iteration)` only, so every rank draws the same shape.
pub(crate) const RES_TAG: &str = "res";
const PERM_TAG: &str = "perm";

/// Turns a validated config into epoch schedules.
///
/// The shape of an epoch (resolution and batch size per iteration) depends
/// only on the config, the epoch and the number of active ids; the ids are
/// then cut from one seeded permutation of the active set. Splitting the two
/// lets update counting skip the permutation entirely.
pub trait EpochPlanner: Send + Sync {
    fn config(&self) -> &ValidConfig;

    fn plan_shapes(&self, epoch: u64, active_count: u64) -> Vec<PlanShape>;

    fn plan_epoch(&self, epoch: u64, active_ids: Option<&[SampleId]>) -> Result<EpochSchedule> {
        let ids = epoch_permutation(self.config(), epoch, active_ids)?;
        let shapes = self.plan_shapes(epoch, ids.len() as u64);
        Ok(fill(epoch, &shapes, &ids))
    }
}

/// Lays out iterations until `active_count` ids are consumed. `choose`
/// returns `(resolution, clip, batch)` for iteration `t`. A short final
/// batch is kept unless `drop_last`.
pub(crate) fn layout(
    config: &ValidConfig,
    active_count: u64,
    mut choose: impl FnMut(u64) -> (Resolution, Option<ClipShape>, u64),
) -> Vec<PlanShape> {
    let mut shapes = Vec::new();
    let mut remaining = active_count;
    let mut iteration = 0;
    while remaining > 0 {
        let (resolution, clip, batch_size) = choose(iteration);
        let len = batch_size.min(remaining);
        if len < batch_size && config.drop_last {
            break;
        }
        shapes.push(PlanShape {
            iteration,
            resolution,
            clip,
            batch_size,
            len,
        });
        remaining -= len;
        iteration += 1;
    }
    shapes
}

pub(crate) fn draw_index(config: &ValidConfig, epoch: u64, iteration: u64, len: usize) -> usize {
    if len <= 1 {
        return 0;
    }
    SeededRng::new(config.seed, StreamKey::new(epoch, iteration, RES_TAG))
        .draw_choice(len)
        .unwrap_or(0)
}

/// The active ids (default `0..dataset_size`) in seeded random order.
/// `active_ids` is treated as a set: its input order does not matter.
pub(crate) fn epoch_permutation(
    config: &ValidConfig,
    epoch: u64,
    active_ids: Option<&[SampleId]>,
) -> Result<Vec<SampleId>> {
    let n = config.dataset_size;
    let mut ids: Vec<SampleId> = match active_ids {
        None => (0..n).map(|i| i as SampleId).collect(),
        Some(active) => {
            let mut seen = vec![false; n as usize];
            for &id in active {
                let slot = seen.get_mut(id as usize).filter(|s| !**s);
                match slot {
                    Some(s) => *s = true,
                    None => {
                        return Err(Error::InvalidActiveIds {
                            id,
                            dataset_size: n,
                        })
                    }
                }
            }
            seen.iter()
                .enumerate()
                .filter(|(_, s)| **s)
                .map(|(i, _)| i as SampleId)
                .collect()
        }
    };
    SeededRng::new(config.seed, StreamKey::new(epoch, 0, PERM_TAG)).shuffle(&mut ids);
    Ok(ids)
}

pub(crate) fn fill(epoch: u64, shapes: &[PlanShape], ids: &[SampleId]) -> EpochSchedule {
    let mut offset = 0usize;
    let plans = shapes
        .iter()
        .map(|s| {
            let end = offset + s.len as usize;
            let plan = BatchPlan {
                iteration: s.iteration,
                resolution: s.resolution,
                clip: s.clip,
                batch_size: s.batch_size,
                sample_ids: ids[offset..end].to_vec(),
            };
            offset = end;
            plan
        })
        .collect();
    EpochSchedule::new(epoch, plans)
}

/// Planner for the three image strategies.
#[derive(Debug, Clone)]
pub struct ImagePlanner {
    config: ValidConfig,
    strategy: Strategy,
    /// Global batch per entry of the resolution set.
    batches: Vec<u64>,
}

impl ImagePlanner {
    /// Plans `config` with `strategy`, whatever `config.strategy` says.
    /// `Strategy::VideoVbs` falls back to the image variable-batch rule.
    pub fn new(config: ValidConfig, strategy: Strategy) -> Self {
        let global = config.global_batch();
        let batches = config
            .resolutions
            .iter()
            .map(|r| match strategy {
                Strategy::MscVbs | Strategy::VideoVbs => scaled_batch_size(
                    global,
                    config.base_resolution,
                    r,
                    config.batch_rounding,
                    config.min_batch,
                    config.world_size,
                ),
                _ => global,
            })
            .collect();
        Self {
            config,
            strategy,
            batches,
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Global batch size used at each resolution in the set.
    pub fn batch_table(&self) -> impl Iterator<Item = (Resolution, u64)> + '_ {
        self.config.resolutions.iter().zip(self.batches.iter().copied())
    }
}

impl EpochPlanner for ImagePlanner {
    fn config(&self) -> &ValidConfig {
        &self.config
    }

    fn plan_shapes(&self, epoch: u64, active_count: u64) -> Vec<PlanShape> {
        let cfg = &self.config;
        let set = &cfg.resolutions;
        layout(cfg, active_count, |t| match self.strategy {
            Strategy::SscFbs => (cfg.base_resolution, None, cfg.global_batch()),
            _ => {
                let i = draw_index(cfg, epoch, t, set.len());
                let res = set.get(i).unwrap_or(cfg.base_resolution);
                (res, None, self.batches[i])
            }
        })
    }
}

/// The planner registered for `config.strategy`.
pub fn planner_for(config: ValidConfig) -> Box<dyn EpochPlanner> {
    match config.strategy {
        Strategy::VideoVbs => Box::new(VideoPlanner::from_config(config)),
        s => Box::new(ImagePlanner::new(config, s)),
    }
}

/// Plans one epoch with the config's own strategy.
pub fn plan_epoch(
    config: &ValidConfig,
    epoch: u64,
    active_ids: Option<&[SampleId]>,
) -> Result<EpochSchedule> {
    planner_for(config.clone()).plan_epoch(epoch, active_ids)
}

/// Id-free epoch layout with the config's own strategy.
pub fn plan_shapes(config: &ValidConfig, epoch: u64, active_count: u64) -> Vec<PlanShape> {
    planner_for(config.clone()).plan_shapes(epoch, active_count)
}

/// Single-scale, fixed batch: every plan is `global_batch` ids at the base
/// resolution.
pub fn plan_ssc_fbs(
    config: &ValidConfig,
    epoch: u64,
    active_ids: Option<&[SampleId]>,
) -> Result<EpochSchedule> {
    ImagePlanner::new(config.clone(), Strategy::SscFbs).plan_epoch(epoch, active_ids)
}

/// Multi-scale, fixed batch: resolution drawn uniformly per iteration.
pub fn plan_msc_fbs(
    config: &ValidConfig,
    epoch: u64,
    active_ids: Option<&[SampleId]>,
) -> Result<EpochSchedule> {
    ImagePlanner::new(config.clone(), Strategy::MscFbs).plan_epoch(epoch, active_ids)
}

/// Multi-scale, variable batch: resolution drawn uniformly per iteration and
/// the batch rescaled to keep `batch * H * W` at its base value.
pub fn plan_msc_vbs(
    config: &ValidConfig,
    epoch: u64,
    active_ids: Option<&[SampleId]>,
) -> Result<EpochSchedule> {
    ImagePlanner::new(config.clone(), Strategy::MscVbs).plan_epoch(epoch, active_ids)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::config::{validate_config, BatchRounding, ResolutionSet, SamplerConfig};

    fn cfg(n: u64, b: u64, drop_last: bool) -> SamplerConfig {
        SamplerConfig {
            strategy: Strategy::SscFbs,
            dataset_size: n,
            base_batch: b,
            base_resolution: Resolution::square(224),
            resolutions: ResolutionSet::standard(),
            epochs: 1,
            world_size: 1,
            seed: 11,
            drop_last,
            batch_rounding: BatchRounding::MultipleOfWorld,
            min_batch: 1,
            video: None,
        }
    }

    fn valid(c: SamplerConfig) -> ValidConfig {
        validate_config(c).unwrap()
    }

    #[test]
    fn ssc_drop_last_leaves_remainder_unused() {
        let s = plan_ssc_fbs(&valid(cfg(10, 4, true)), 0, None).unwrap();
        assert_eq!(s.total_updates, 2);
        assert!(s.plans.iter().all(|p| p.sample_ids.len() == 4));
        assert_eq!(s.total_samples, 8);
        let used: HashSet<_> = s.plans.iter().flat_map(|p| p.sample_ids.clone()).collect();
        assert_eq!(used.len(), 8);
    }

    #[test]
    fn ssc_exact_division_covers_all() {
        let s = plan_ssc_fbs(&valid(cfg(8, 4, false)), 0, None).unwrap();
        assert_eq!(s.total_updates, 2);
        let mut all: Vec<_> = s.plans.iter().flat_map(|p| p.sample_ids.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn ssc_keeps_short_final_batch() {
        let s = plan_ssc_fbs(&valid(cfg(10, 4, false)), 0, None).unwrap();
        assert_eq!(s.total_updates, 3);
        assert_eq!(s.plans[2].sample_ids.len(), 2);
        assert_eq!(s.plans[2].batch_size, 4);
        assert!(s.plans.iter().all(|p| p.resolution == Resolution::square(224)));
    }

    #[test]
    fn ssc_imagenet_updates_per_epoch() {
        let c = valid(cfg(1_281_167, 1024, true));
        let shapes = plan_shapes(&c, 0, c.dataset_size);
        assert_eq!(shapes.len(), 1251);
        assert_eq!(shapes.len() * 300, 375_300);
    }

    #[test]
    fn msc_fbs_with_single_resolution_equals_ssc() {
        let mut c = cfg(1000, 32, false);
        c.resolutions = ResolutionSet::squares(&[224]);
        let c = valid(c);
        for epoch in 0..3 {
            assert_eq!(
                plan_msc_fbs(&c, epoch, None).unwrap(),
                plan_ssc_fbs(&c, epoch, None).unwrap()
            );
        }
    }

    #[test]
    fn msc_fbs_matches_ssc_update_count() {
        let c = valid(cfg(100_003, 64, true));
        let a = plan_msc_fbs(&c, 0, None).unwrap();
        let b = plan_ssc_fbs(&c, 0, None).unwrap();
        assert_eq!(a.total_updates, b.total_updates);
        assert!(a.plans.iter().all(|p| p.batch_size == 64));
    }

    #[test]
    fn msc_fbs_resolution_frequencies_uniform() {
        let c = valid(cfg(640_000, 32, true));
        let shapes = ImagePlanner::new(c.clone(), Strategy::MscFbs).plan_shapes(0, c.dataset_size);
        assert!(shapes.len() >= 10_000);
        for r in c.resolutions.iter() {
            let f = shapes.iter().filter(|s| s.resolution == r).count() as f64
                / shapes.len() as f64;
            assert!((f - 0.2).abs() <= 0.02, "{r}: {f}");
        }
    }

    #[test]
    fn msc_vbs_conserves_pixel_volume() {
        let c = valid(cfg(1_281_167, 1024, true));
        let s = plan_msc_vbs(&c, 0, None).unwrap();
        let base = 1024 * Resolution::square(224).pixel_count();
        for p in &s.plans {
            let vol = p.batch_size * p.resolution.pixel_count();
            assert!(base.abs_diff(vol) <= p.resolution.pixel_count());
            assert_eq!(p.sample_ids.len() as u64, p.batch_size);
        }
    }

    #[test]
    fn vbs_batch_table_matches_hand_arithmetic() {
        let p = ImagePlanner::new(valid(cfg(1_281_167, 1024, true)), Strategy::MscVbs);
        let table: Vec<u64> = p.batch_table().map(|(_, b)| b).collect();
        // 1024*224^2 / s^2 for s in 128, 192, 224, 288, 320, floored
        assert_eq!(table, vec![3136, 1393, 1024, 619, 501]);
    }

    #[test]
    fn active_ids_restrict_and_are_order_insensitive() {
        let c = valid(cfg(100, 8, false));
        let active: Vec<u32> = (0..100).filter(|i| i % 3 != 0).collect();
        let mut reversed = active.clone();
        reversed.reverse();
        let a = plan_msc_vbs(&c, 2, Some(&active)).unwrap();
        let b = plan_msc_vbs(&c, 2, Some(&reversed)).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<u32> = a.plans.iter().flat_map(|p| p.sample_ids.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, active);
    }

    #[test]
    fn bad_active_ids_rejected() {
        let c = valid(cfg(10, 2, false));
        assert_eq!(
            plan_ssc_fbs(&c, 0, Some(&[1, 1])).unwrap_err().code(),
            "INVALID_ACTIVE_IDS"
        );
        assert_eq!(
            plan_ssc_fbs(&c, 0, Some(&[10])).unwrap_err().code(),
            "INVALID_ACTIVE_IDS"
        );
    }

    #[test]
    fn empty_active_set_gives_empty_schedule() {
        let c = valid(cfg(10, 2, false));
        let s = plan_msc_vbs(&c, 0, Some(&[])).unwrap();
        assert_eq!(s.total_updates, 0);
    }

    #[test]
    fn epochs_use_different_permutations() {
        let c = valid(cfg(64, 8, false));
        let a = plan_ssc_fbs(&c, 0, None).unwrap();
        let b = plan_ssc_fbs(&c, 1, None).unwrap();
        assert_ne!(a.plans[0].sample_ids, b.plans[0].sample_ids);
    }
}
