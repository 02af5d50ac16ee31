//! JSON-lines schedule files.
//!
//! The first line is a header `{"schema_version":1,"kind":"schedule","config":{..}}`;
//! every following line is one plan:
//!
//! ```text
//! {"epoch":0,"iteration":0,"height":224,"width":224,"batch_size":4,"sample_ids":[7,2,9,0]}
//! {"epoch":0,"iteration":1,"height":128,"width":128,"batch_size":4,"id_range":[[0,4]]}
//! ```
//!
//! Compact mode replaces `sample_ids` with `id_range`, a list of half-open
//! `[start, end)` runs of consecutive ids in plan order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Resolution, SamplerConfig};
use crate::error::{Error, Result};

use super::{BatchPlan, ClipShape, EpochSchedule, SampleId};

pub const SCHEDULE_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u64,
    kind: String,
    config: SamplerConfig,
}

#[derive(Serialize, Deserialize)]
struct PlanLine {
    epoch: u64,
    iteration: u64,
    height: u32,
    width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_frames: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clips_per_video: Option<u32>,
    batch_size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_ids: Option<Vec<SampleId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id_range: Option<Vec<[SampleId; 2]>>,
}

fn to_runs(ids: &[SampleId]) -> Vec<[SampleId; 2]> {
    let mut runs: Vec<[SampleId; 2]> = Vec::new();
    for &id in ids {
        match runs.last_mut() {
            Some(run) if run[1] == id && id != SampleId::MAX => run[1] = id + 1,
            _ => runs.push([id, id + 1]),
        }
    }
    runs
}

fn from_runs(runs: &[[SampleId; 2]]) -> Result<Vec<SampleId>> {
    let mut ids = Vec::new();
    for &[start, end] in runs {
        if end < start {
            return Err(Error::Parse(format!("bad id range [{start}, {end})")));
        }
        ids.extend(start..end);
    }
    Ok(ids)
}

/// Streams a schedule file one epoch at a time.
pub struct ScheduleWriter<W: Write> {
    out: W,
    compact: bool,
}

impl<W: Write> ScheduleWriter<W> {
    pub fn new(out: W, compact: bool) -> Self {
        Self { out, compact }
    }

    pub fn write_header(&mut self, config: &SamplerConfig) -> Result<()> {
        let header = Header {
            schema_version: SCHEDULE_SCHEMA_VERSION,
            kind: "schedule".into(),
            config: config.clone(),
        };
        serde_json::to_writer(&mut self.out, &header)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_epoch(&mut self, schedule: &EpochSchedule) -> Result<()> {
        for p in &schedule.plans {
            let (sample_ids, id_range) = if self.compact {
                (None, Some(to_runs(&p.sample_ids)))
            } else {
                (Some(p.sample_ids.clone()), None)
            };
            let line = PlanLine {
                epoch: schedule.epoch,
                iteration: p.iteration,
                height: p.resolution.height,
                width: p.resolution.width,
                num_frames: p.clip.map(|c| c.num_frames),
                clips_per_video: p.clip.map(|c| c.clips_per_video),
                batch_size: p.batch_size,
                sample_ids,
                id_range,
            };
            serde_json::to_writer(&mut self.out, &line)?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_schedule_jsonl<W: Write>(
    out: W,
    config: Option<&SamplerConfig>,
    schedules: &[EpochSchedule],
    compact: bool,
) -> Result<()> {
    let mut w = ScheduleWriter::new(out, compact);
    if let Some(c) = config {
        w.write_header(c)?;
    }
    for s in schedules {
        w.write_epoch(s)?;
    }
    w.finish().map(drop)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedSchedule {
    pub config: Option<SamplerConfig>,
    pub epochs: Vec<EpochSchedule>,
}

/// Reads a schedule file. Plans are grouped into epochs in file order; the
/// header is optional.
pub fn read_schedule_jsonl<R: BufRead>(input: R) -> Result<ImportedSchedule> {
    let mut config = None;
    let mut epochs: Vec<EpochSchedule> = Vec::new();
    let mut pending: Vec<BatchPlan> = Vec::new();
    let mut current: Option<u64> = None;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)?;
        if let Some(v) = value.get("schema_version") {
            let version = v.as_u64().unwrap_or(0);
            if version != SCHEDULE_SCHEMA_VERSION {
                return Err(Error::SchemaVersion(version));
            }
            let header: Header = serde_json::from_value(value)?;
            config = Some(header.config);
            continue;
        }
        let line: PlanLine = serde_json::from_value(value)?;
        let sample_ids = match (line.sample_ids, line.id_range) {
            (Some(ids), None) => ids,
            (None, Some(runs)) => from_runs(&runs)?,
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: exactly one of sample_ids or id_range required",
                    n + 1
                )))
            }
        };
        let clip = match (line.num_frames, line.clips_per_video) {
            (Some(num_frames), Some(clips_per_video)) => Some(ClipShape {
                num_frames,
                clips_per_video,
            }),
            (None, None) => None,
            _ => return Err(Error::Parse(format!("line {}: partial clip shape", n + 1))),
        };
        if current != Some(line.epoch) {
            if let Some(e) = current {
                epochs.push(EpochSchedule::new(e, std::mem::take(&mut pending)));
            }
            current = Some(line.epoch);
        }
        pending.push(BatchPlan {
            iteration: line.iteration,
            resolution: Resolution::new(line.height, line.width),
            clip,
            batch_size: line.batch_size,
            sample_ids,
        });
    }
    if let Some(e) = current {
        epochs.push(EpochSchedule::new(e, pending));
    }
    Ok(ImportedSchedule { config, epochs })
}
