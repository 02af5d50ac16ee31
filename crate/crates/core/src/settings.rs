//! Flat `key = value` settings shared by config files and command-line flags.
//!
//! A config file is one assignment per line; `#` starts a comment and blank
//! lines are ignored. Keys are the field names of [`SamplerConfig`] and
//! [`TrainerConfig`], plus `video_*`, `set_*` and memory keys. Unknown keys
//! are rejected.

use std::str::FromStr;

use crate::analysis::MemorySpec;
use crate::config::{Resolution, ResolutionSet, SamplerConfig, VideoSettings};
use crate::error::{Error, Result};
use crate::presets::load_preset;
use crate::set::SetConfig;
use crate::trainer::TrainerConfig;

/// Environment variable consulted for the seed before files and flags.
pub const SEED_ENV: &str = "BATCHFORGE_SEED";

pub const KEYS: &[&str] = &[
    "strategy",
    "dataset_size",
    "base_batch",
    "base_resolution",
    "resolutions",
    "epochs",
    "world_size",
    "seed",
    "drop_last",
    "batch_rounding",
    "min_batch",
    "video_frames",
    "video_clips",
    "video_base_frames",
    "video_base_clips",
    "max_lr",
    "warmup_epochs",
    "total_epochs",
    "min_lr",
    "momentum",
    "weight_decay",
    "label_smoothing",
    "ema_decay",
    "set_tau",
    "set_window",
    "set_start_epoch",
    "set_reeval_stride",
    "channels",
    "bytes_per_element",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub sampler: SamplerConfig,
    pub trainer: TrainerConfig,
    pub set: Option<SetConfig>,
    pub memory: MemorySpec,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl Settings {
    pub fn from_preset(name: &str) -> Result<Self> {
        let (sampler, trainer) = load_preset(name)?;
        Ok(Self {
            sampler,
            trainer,
            set: None,
            memory: MemorySpec::default(),
        })
    }

    fn video(&mut self) -> &mut VideoSettings {
        self.sampler.video.get_or_insert_with(|| VideoSettings {
            frames: vec![8],
            clips: vec![1],
            base_frames: 8,
            base_clips: 1,
        })
    }

    /// SET starts disabled; the first `set_*` key enables it with `tau = 1`
    /// and `window = 2` before applying the value.
    fn set_config(&mut self) -> &mut SetConfig {
        self.set.get_or_insert(SetConfig {
            tau: 1.0,
            window: 2,
            start_epoch: None,
            reeval_stride: 1,
        })
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.sampler;
        let t = &mut self.trainer;
        match key {
            "strategy" => s.strategy = parse(key, value)?,
            "dataset_size" => s.dataset_size = parse(key, value)?,
            "base_batch" => s.base_batch = parse(key, value)?,
            "base_resolution" => s.base_resolution = parse(key, value)?,
            "resolutions" => s.resolutions = ResolutionSet::new(parse_list::<Resolution>(key, value)?),
            "epochs" => s.epochs = parse(key, value)?,
            "world_size" => s.world_size = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "drop_last" => s.drop_last = parse(key, value)?,
            "batch_rounding" => s.batch_rounding = parse(key, value)?,
            "min_batch" => s.min_batch = parse(key, value)?,
            "video_frames" => self.video().frames = parse_list(key, value)?,
            "video_clips" => self.video().clips = parse_list(key, value)?,
            "video_base_frames" => self.video().base_frames = parse(key, value)?,
            "video_base_clips" => self.video().base_clips = parse(key, value)?,
            "max_lr" => t.max_lr = parse(key, value)?,
            "warmup_epochs" => t.warmup_epochs = parse(key, value)?,
            "total_epochs" => t.total_epochs = parse(key, value)?,
            "min_lr" => t.min_lr = parse(key, value)?,
            "momentum" => t.momentum = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "label_smoothing" => t.label_smoothing = parse(key, value)?,
            "ema_decay" => t.ema_decay = parse(key, value)?,
            "set_tau" => self.set_config().tau = parse(key, value)?,
            "set_window" => self.set_config().window = parse(key, value)?,
            "set_start_epoch" => self.set_config().start_epoch = Some(parse(key, value)?),
            "set_reeval_stride" => self.set_config().reeval_stride = parse(key, value)?,
            "channels" => self.memory.channels = parse(key, value)?,
            "bytes_per_element" => self.memory.bytes_per_element = parse(key, value)?,
            other => return Err(Error::Parse(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        pairs.into_iter().try_for_each(|(k, v)| self.apply(k, v))
    }
}

/// Parses config file text into ordered `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        let k = k.trim();
        if k != "preset" && !KEYS.contains(&k) {
            return Err(Error::Parse(format!("line {}: unknown key {k:?}", n + 1)));
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}
