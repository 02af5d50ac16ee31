use serde::{Deserialize, Serialize};

use crate::config::{Resolution, ValidConfig};
use crate::error::{Error, Result};

use super::plan::{draw_index, layout, EpochPlanner};
use super::{scale_batch_by_volume, ClipShape, EpochSchedule, PlanShape, SampleId};

/// Shape of one video sample: frames per clip, clips per video, and the
/// spatial size of each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VideoClipSpec {
    pub num_frames: u32,
    pub clips_per_video: u32,
    pub resolution: Resolution,
}

impl VideoClipSpec {
    pub fn new(num_frames: u32, clips_per_video: u32, resolution: Resolution) -> Self {
        Self {
            num_frames,
            clips_per_video,
            resolution,
        }
    }

    pub fn volume(&self) -> u64 {
        u64::from(self.num_frames) * u64::from(self.clips_per_video) * self.resolution.pixel_count()
    }

    fn clip(&self) -> ClipShape {
        ClipShape {
            num_frames: self.num_frames,
            clips_per_video: self.clips_per_video,
        }
    }
}

/// The spec set `frames x clips x resolutions` and the base spec of a video
/// config, or `None` when the config carries no video settings.
pub fn video_specs(config: &ValidConfig) -> Option<(Vec<VideoClipSpec>, VideoClipSpec)> {
    let video = config.video.as_ref()?;
    let mut specs = Vec::new();
    for &f in &video.frames {
        for &c in &video.clips {
            for r in config.resolutions.iter() {
                specs.push(VideoClipSpec::new(f, c, r));
            }
        }
    }
    let base = VideoClipSpec::new(video.base_frames, video.base_clips, config.base_resolution);
    Some((specs, base))
}

/// Variable-batch planner over clip specs: one spec drawn uniformly per
/// iteration, batch rescaled so `batch * volume` matches the base pairing.
#[derive(Debug, Clone)]
pub struct VideoPlanner {
    config: ValidConfig,
    specs: Vec<VideoClipSpec>,
    batches: Vec<u64>,
}

impl VideoPlanner {
    pub fn new(config: ValidConfig, specs: Vec<VideoClipSpec>, base: VideoClipSpec) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::ZeroSetSize);
        }
        if specs.iter().any(|s| s.volume() == 0) || base.volume() == 0 {
            return Err(Error::Parse("video spec with zero volume".into()));
        }
        let batches = specs
            .iter()
            .map(|s| {
                scale_batch_by_volume(
                    config.global_batch(),
                    base.volume(),
                    s.volume(),
                    config.batch_rounding,
                    config.min_batch,
                    config.world_size,
                )
            })
            .collect();
        Ok(Self {
            config,
            specs,
            batches,
        })
    }

    /// Builds specs from `config.video`; without video settings the base
    /// resolution alone is used as a single one-frame spec.
    pub fn from_config(config: ValidConfig) -> Self {
        let (specs, base) = video_specs(&config).unwrap_or_else(|| {
            let base = VideoClipSpec::new(1, 1, config.base_resolution);
            (vec![base], base)
        });
        // validated configs always yield non-empty, positive specs
        Self::new(config.clone(), specs.clone(), base).unwrap_or_else(|_| Self {
            batches: vec![config.global_batch(); specs.len()],
            config,
            specs,
        })
    }

    pub fn specs(&self) -> &[VideoClipSpec] {
        &self.specs
    }

    pub fn batch_table(&self) -> impl Iterator<Item = (VideoClipSpec, u64)> + '_ {
        self.specs.iter().copied().zip(self.batches.iter().copied())
    }
}

impl EpochPlanner for VideoPlanner {
    fn config(&self) -> &ValidConfig {
        &self.config
    }

    fn plan_shapes(&self, epoch: u64, active_count: u64) -> Vec<PlanShape> {
        layout(&self.config, active_count, |t| {
            let i = draw_index(&self.config, epoch, t, self.specs.len());
            let spec = self.specs[i];
            (spec.resolution, Some(spec.clip()), self.batches[i])
        })
    }
}

/// Plans one epoch over an explicit spec list with `base_spec` carrying
/// `config.base_batch` (per replica).
pub fn plan_video_vbs(
    specs: &[VideoClipSpec],
    base_spec: VideoClipSpec,
    config: &ValidConfig,
    epoch: u64,
    active_ids: Option<&[SampleId]>,
) -> Result<EpochSchedule> {
    VideoPlanner::new(config.clone(), specs.to_vec(), base_spec)?.plan_epoch(epoch, active_ids)
}
