//! Shared domain types and sampler configuration validation.
//!
//! A [`SamplerConfig`] is plain data and may be invalid; [`validate_config`]
//! checks every invariant at once and wraps the result in a [`ValidConfig`],
//! which is what the samplers and analysis functions accept.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigErrors, ConfigViolation, Error};

/// Spatial resolution of an input, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub height: u32,
    pub width: u32,
}

impl Resolution {
    pub const fn new(height: u32, width: u32) -> Self {
        Self { height, width }
    }

    pub const fn square(side: u32) -> Self {
        Self::new(side, side)
    }

    pub fn pixel_count(&self) -> u64 {
        u64::from(self.height) * u64::from(self.width)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Parses `"224"` (square) or `"256x192"` (height x width).
impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| Error::Parse(format!("invalid resolution {s:?}")))
        };
        match s.split_once(['x', 'X']) {
            Some((h, w)) => Ok(Resolution::new(parse(h)?, parse(w)?)),
            None => parse(s).map(Resolution::square),
        }
    }
}

/// Resolutions sorted ascending by pixel count. Ordering is checked by
/// [`validate_config`], not on construction, so that a config file with a
/// bad ordering can be reported alongside every other problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResolutionSet(Vec<Resolution>);

impl ResolutionSet {
    pub fn new(entries: Vec<Resolution>) -> Self {
        Self(entries)
    }

    /// Sorts by pixel count (ties broken by height) and drops duplicates.
    pub fn sorted(mut entries: Vec<Resolution>) -> Self {
        entries.sort_by_key(|r| (r.pixel_count(), r.height));
        entries.dedup();
        Self(entries)
    }

    pub fn squares(sides: &[u32]) -> Self {
        Self(sides.iter().copied().map(Resolution::square).collect())
    }

    /// `{128, 192, 224, 288, 320}` squared.
    pub fn standard() -> Self {
        Self::squares(&[128, 192, 224, 288, 320])
    }

    pub fn entries(&self) -> &[Resolution] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<Resolution> {
        self.0.get(index).copied()
    }

    pub fn contains(&self, res: Resolution) -> bool {
        self.0.contains(&res)
    }

    /// The largest entry; `None` only for an (invalid) empty set.
    pub fn max(&self) -> Option<Resolution> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Resolution> + '_ {
        self.0.iter().copied()
    }

    fn violations(&self, out: &mut Vec<ConfigViolation>) {
        if self.0.is_empty() {
            out.push(ConfigViolation::EmptyResolutionSet);
            return;
        }
        for r in &self.0 {
            if r.height == 0 || r.width == 0 {
                out.push(ConfigViolation::ZeroDimension(*r));
            }
        }
        if let Some(w) = self
            .0
            .windows(2)
            .find(|w| w[0].pixel_count() >= w[1].pixel_count())
        {
            out.push(ConfigViolation::UnsortedResolutions {
                previous: w[0],
                next: w[1],
            });
        }
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let norm = s.trim().to_ascii_lowercase().replace('-', "_");
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == norm)
                    .ok_or_else(|| Error::Parse(format!(concat!("unknown ", stringify!($name), " {:?}"), s)))
            }
        }
    };
}

named_enum! {
    /// Batch sampling strategy.
    Strategy {
        SscFbs => "ssc_fbs",
        MscFbs => "msc_fbs",
        MscVbs => "msc_vbs",
        VideoVbs => "video_vbs",
    }
}

named_enum! {
    /// How a rescaled batch size is turned into an integer.
    BatchRounding {
        Floor => "floor",
        Nearest => "nearest",
        MultipleOfWorld => "multiple_of_world",
    }
}

impl Strategy {
    pub fn is_multi_scale(&self) -> bool {
        !matches!(self, Strategy::SscFbs)
    }

    pub fn is_variable_batch(&self) -> bool {
        matches!(self, Strategy::MscVbs | Strategy::VideoVbs)
    }
}

/// Temporal axes for the video sampler. The clip-spec set is the product
/// `frames x clips x resolutions`, and the base spec is
/// `(base_frames, base_clips, base_resolution)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSettings {
    pub frames: Vec<u32>,
    pub clips: Vec<u32>,
    pub base_frames: u32,
    pub base_clips: u32,
}

/// Everything a sampler needs to lay out batches. `base_batch` is per
/// replica; the unsharded schedule consumes `base_batch * world_size` ids
/// per iteration at `base_resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub dataset_size: u64,
    pub base_batch: u64,
    pub base_resolution: Resolution,
    pub resolutions: ResolutionSet,
    pub epochs: u64,
    pub world_size: u32,
    pub seed: u64,
    pub drop_last: bool,
    pub batch_rounding: BatchRounding,
    pub min_batch: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<VideoSettings>,
}

impl SamplerConfig {
    pub fn global_batch(&self) -> u64 {
        self.base_batch * u64::from(self.world_size)
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// A [`SamplerConfig`] that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidConfig(SamplerConfig);

impl ValidConfig {
    pub fn into_inner(self) -> SamplerConfig {
        self.0
    }
}

impl Deref for ValidConfig {
    type Target = SamplerConfig;

    fn deref(&self) -> &SamplerConfig {
        &self.0
    }
}

impl TryFrom<SamplerConfig> for ValidConfig {
    type Error = ConfigErrors;

    fn try_from(config: SamplerConfig) -> Result<Self, Self::Error> {
        validate_config(config)
    }
}

/// Checks every [`SamplerConfig`] invariant and returns either the unchanged
/// config or the full list of violations.
pub fn validate_config(config: SamplerConfig) -> Result<ValidConfig, ConfigErrors> {
    let mut v = Vec::new();
    config.resolutions.violations(&mut v);
    let base = config.base_resolution;
    if base.height == 0 || base.width == 0 {
        v.push(ConfigViolation::ZeroDimension(base));
    }
    if config.strategy.is_multi_scale()
        && !config.resolutions.is_empty()
        && !config.resolutions.contains(base)
    {
        v.push(ConfigViolation::BaseResNotInSet(base));
    }
    if config.base_batch == 0 || config.min_batch == 0 {
        v.push(ConfigViolation::ZeroBatch);
    } else if config.min_batch > config.base_batch {
        v.push(ConfigViolation::MinBatchExceedsBatch {
            min_batch: config.min_batch,
            base_batch: config.base_batch,
        });
    }
    if config.world_size == 0 {
        v.push(ConfigViolation::ZeroWorldSize);
    }
    if config.epochs == 0 {
        v.push(ConfigViolation::ZeroEpochs);
    }
    if config.dataset_size == 0 {
        v.push(ConfigViolation::ZeroDatasetSize);
    } else if config.drop_last && config.dataset_size < config.global_batch() {
        v.push(ConfigViolation::DatasetTooSmall {
            dataset_size: config.dataset_size,
            global_batch: config.global_batch(),
        });
    }
    if config.strategy == Strategy::VideoVbs {
        match &config.video {
            None => v.push(ConfigViolation::MissingVideoSettings),
            Some(video) => {
                let bad = video.frames.is_empty()
                    || video.clips.is_empty()
                    || video.frames.contains(&0)
                    || video.clips.contains(&0)
                    || !video.frames.contains(&video.base_frames)
                    || !video.clips.contains(&video.base_clips);
                if bad {
                    v.push(ConfigViolation::InvalidVideoSettings);
                }
            }
        }
    }
    if v.is_empty() {
        Ok(ValidConfig(config))
    } else {
        Err(ConfigErrors(v))
    }
}
