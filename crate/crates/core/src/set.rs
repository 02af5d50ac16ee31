//! Sample-efficient training: per-sample easy/hard bookkeeping.
//!
//! A sample is *easy* in an epoch when it was predicted correctly with a
//! true-class probability strictly above `tau`. After `window` consecutive
//! easy epochs it is removed from training. Removed samples are evaluated
//! forward-only every `reeval_stride` epochs and go back into the active set
//! as soon as one of those evaluations is hard; their history is cleared so
//! they need a fresh window before they can be removed again.
//!
//! The state is single-writer: predictions for one sample must be recorded
//! in order, and [`SetState::finalize_epoch`] needs exclusive access.

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::SampleId;

pub const SET_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetConfig {
    /// Confidence threshold; easy means `confidence > tau`.
    pub tau: f64,
    /// Consecutive easy epochs required for removal.
    pub window: u32,
    /// First epoch whose evidence counts; defaults to `window`.
    #[serde(default)]
    pub start_epoch: Option<u64>,
    /// Removed samples are re-evaluated on epochs divisible by this.
    #[serde(default = "default_stride")]
    pub reeval_stride: u64,
}

fn default_stride() -> u64 {
    1
}

impl SetConfig {
    pub fn new(tau: f64, window: u32) -> Result<Self> {
        let c = Self {
            tau,
            window,
            start_epoch: None,
            reeval_stride: 1,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidSetConfig(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.window == 0 {
            return Err(Error::InvalidSetConfig("window must be at least 1".into()));
        }
        if self.reeval_stride == 0 {
            return Err(Error::InvalidSetConfig("reeval_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn effective_start_epoch(&self) -> u64 {
        self.start_epoch.unwrap_or(u64::from(self.window))
    }

    /// Earliest epoch at whose end a sample can be removed.
    pub fn first_removal_epoch(&self) -> u64 {
        self.effective_start_epoch() + u64::from(self.window) - 1
    }
}

/// One evaluation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub epoch: u64,
    pub correct: bool,
    pub confidence: f64,
}

impl Evidence {
    pub fn is_easy(&self, tau: f64) -> bool {
        self.correct && self.confidence > tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Active,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: SampleId,
    pub status: SampleStatus,
    pub history: VecDeque<Evidence>,
}

impl SampleRecord {
    fn evaluated_in(&self, epoch: u64) -> bool {
        self.history.back().is_some_and(|e| e.epoch == epoch)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCounters {
    pub removed_count: u64,
    pub readded_count: u64,
    pub forward_passes: u64,
}

/// What [`SetState::finalize_epoch`] changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochTransition {
    pub epoch: u64,
    pub newly_removed: Vec<SampleId>,
    pub readded: Vec<SampleId>,
    pub active_next: u64,
    pub forward_passes: u64,
}

/// One row of the per-epoch CSV report. `active` is the number of samples
/// trained on during the epoch, `removed` the removed count after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochReportRow {
    pub epoch: u64,
    pub active: u64,
    pub removed: u64,
    pub readded: u64,
    pub forward_passes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetState {
    config: SetConfig,
    epoch: u64,
    records: Vec<SampleRecord>,
    counters: SetCounters,
    report: Vec<EpochReportRow>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u64,
    #[serde(flatten)]
    state: SetState,
}

impl SetState {
    /// Fresh state with all `dataset_size` samples active at epoch 0.
    pub fn new(dataset_size: u64, config: SetConfig) -> Result<Self> {
        config.validate()?;
        let records = (0..dataset_size)
            .map(|i| SampleRecord {
                sample_id: i as SampleId,
                status: SampleStatus::Active,
                history: VecDeque::with_capacity(config.window as usize),
            })
            .collect();
        Ok(Self {
            config,
            epoch: 0,
            records,
            counters: SetCounters::default(),
            report: Vec::new(),
        })
    }

    pub fn config(&self) -> &SetConfig {
        &self.config
    }

    /// The epoch currently being recorded.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn counters(&self) -> SetCounters {
        self.counters
    }

    pub fn report(&self) -> &[EpochReportRow] {
        &self.report
    }

    pub fn record(&self, id: SampleId) -> Option<&SampleRecord> {
        self.records.get(id as usize)
    }

    pub fn dataset_size(&self) -> u64 {
        self.records.len() as u64
    }

    /// Appends this epoch's evaluation of `id`. A second call for the same
    /// epoch replaces the first.
    pub fn record_prediction(&mut self, id: SampleId, correct: bool, confidence: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ConfidenceOutOfRange(confidence));
        }
        let window = self.config.window as usize;
        let epoch = self.epoch;
        let rec = self
            .records
            .get_mut(id as usize)
            .ok_or(Error::UnknownSample(id))?;
        let ev = Evidence {
            epoch,
            correct,
            confidence,
        };
        if rec.evaluated_in(epoch) {
            if let Some(last) = rec.history.back_mut() {
                *last = ev;
            }
        } else {
            rec.history.push_back(ev);
            while rec.history.len() > window {
                rec.history.pop_front();
            }
        }
        Ok(())
    }

    fn window_is_easy(&self, rec: &SampleRecord) -> bool {
        let w = self.config.window as usize;
        if rec.history.len() < w {
            return false;
        }
        let recent = rec.history.range(rec.history.len() - w..);
        let first = rec.history[rec.history.len() - w].epoch;
        let consecutive = self.epoch - first == w as u64 - 1;
        consecutive && rec.evaluated_in(self.epoch) && recent.into_iter().all(|e| e.is_easy(self.config.tau))
    }

    /// Closes the current epoch: removes samples with a full easy window,
    /// re-adds removed samples whose latest evaluation (this epoch) was hard,
    /// and advances to the next epoch.
    pub fn finalize_epoch(&mut self) -> Result<EpochTransition> {
        let epoch = self.epoch;
        let missing: Vec<SampleId> = self
            .records
            .iter()
            .filter(|r| r.status == SampleStatus::Active && !r.evaluated_in(epoch))
            .map(|r| r.sample_id)
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingRecords(missing));
        }

        let can_remove = epoch >= self.config.first_removal_epoch();
        let tau = self.config.tau;
        let mut newly_removed = Vec::new();
        let mut readded = Vec::new();
        let mut trained = 0u64;
        let mut passes = 0u64;
        for i in 0..self.records.len() {
            let rec = &self.records[i];
            match rec.status {
                SampleStatus::Active => {
                    trained += 1;
                    passes += 1;
                    if can_remove && self.window_is_easy(rec) {
                        newly_removed.push(rec.sample_id);
                        self.records[i].status = SampleStatus::Removed;
                    }
                }
                SampleStatus::Removed => {
                    if !rec.evaluated_in(epoch) {
                        continue;
                    }
                    passes += 1;
                    let hard = rec.history.back().is_some_and(|e| !e.is_easy(tau));
                    if hard {
                        readded.push(rec.sample_id);
                        let rec = &mut self.records[i];
                        rec.status = SampleStatus::Active;
                        rec.history.clear();
                    }
                }
            }
        }

        self.counters.removed_count += newly_removed.len() as u64;
        self.counters.readded_count += readded.len() as u64;
        self.counters.forward_passes += passes;
        let active_next = self.active_count();
        self.report.push(EpochReportRow {
            epoch,
            active: trained,
            removed: self.dataset_size() - active_next,
            readded: readded.len() as u64,
            forward_passes: passes,
        });
        self.epoch += 1;
        Ok(EpochTransition {
            epoch,
            newly_removed,
            readded,
            active_next,
            forward_passes: passes,
        })
    }

    pub fn active_count(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| r.status == SampleStatus::Active)
            .count() as u64
    }

    /// Active ids in ascending order.
    pub fn active_samples(&self) -> Vec<SampleId> {
        self.ids_with(SampleStatus::Active)
    }

    pub fn removed_samples(&self) -> Vec<SampleId> {
        self.ids_with(SampleStatus::Removed)
    }

    /// Removed ids to evaluate forward-only during the current epoch.
    pub fn reevaluation_plan(&self) -> Vec<SampleId> {
        if self.epoch.is_multiple_of(self.config.reeval_stride) {
            self.removed_samples()
        } else {
            Vec::new()
        }
    }

    fn ids_with(&self, status: SampleStatus) -> Vec<SampleId> {
        self.records
            .iter()
            .filter(|r| r.status == status)
            .map(|r| r.sample_id)
            .collect()
    }

    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<()> {
        let cp = Checkpoint {
            schema_version: SET_SCHEMA_VERSION,
            state: self.clone(),
        };
        serde_json::to_writer(out, &cp)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .unwrap_or(0);
        if version != SET_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(version));
        }
        let cp: Checkpoint = serde_json::from_value(value)?;
        cp.state.config.validate()?;
        Ok(cp.state)
    }

    /// `epoch,active,removed,readded,forward_passes`, one row per finalized epoch.
    pub fn write_report_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.report {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
