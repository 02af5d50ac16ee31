use crate::error::{Error, Result};

use super::{BatchPlan, EpochSchedule};

/// The slice of `schedule` seen by `rank`: ids `rank, rank + world, ...` of
/// every plan, with the batch size divided by the world size. Resolutions
/// and iteration numbers are untouched, so all ranks step in lockstep.
pub fn shard_for_rank(schedule: &EpochSchedule, rank: u32, world_size: u32) -> Result<EpochSchedule> {
    if world_size == 0 || rank >= world_size {
        return Err(Error::RankOutOfRange { rank, world_size });
    }
    let world = u64::from(world_size);
    let plans = schedule
        .plans
        .iter()
        .map(|p| {
            if p.batch_size % world != 0 {
                return Err(Error::IndivisibleBatch {
                    iteration: p.iteration,
                    batch_size: p.batch_size,
                    world_size,
                });
            }
            Ok(BatchPlan {
                iteration: p.iteration,
                resolution: p.resolution,
                clip: p.clip,
                batch_size: p.batch_size / world,
                sample_ids: p
                    .sample_ids
                    .iter()
                    .copied()
                    .skip(rank as usize)
                    .step_by(world_size as usize)
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EpochSchedule::new(schedule.epoch, plans))
}
