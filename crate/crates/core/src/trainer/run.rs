//! The training loop: sampler schedules in, SET bookkeeping, SGD-M with EMA.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Resolution, ValidConfig};
use crate::error::{Error, Result};
use crate::rng::{SeededRng, StreamKey};
use crate::samplers::{planner_for, SampleId};
use crate::set::{SetConfig, SetState};

use super::data::SyntheticDataset;
use super::lr::WarmupCosine;
use super::model::Model;
use super::optim::{ema_update, sgd_momentum_step};
use super::TrainerConfig;

pub const RUN_SCHEMA_VERSION: u64 = 1;

/// LR ticks per epoch. The schedule advances by epoch fraction so runs with
/// different iteration counts per epoch see the same curve.
const LR_TICKS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub lr_start: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub updates: u64,
    /// Training forward passes plus forward-only evaluations.
    pub forward_passes: u64,
    pub active: u64,
    pub removed: u64,
    pub readded: u64,
    pub holdout_accuracy: f64,
    pub ema_holdout_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u64,
    pub epochs: Vec<EpochStats>,
    pub total_updates: u64,
    pub total_forward_passes: u64,
    pub removed_count: u64,
    pub readded_count: u64,
    pub final_accuracy: f64,
    pub final_ema_accuracy: f64,
    pub final_params: Vec<f64>,
    pub ema_params: Vec<f64>,
}

impl RunReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// One row per epoch, same columns as [`EpochStats`].
    pub fn write_epochs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maps a sampler resolution onto the dataset grid: the largest resolution
/// in the set keeps the full grid, smaller ones pool proportionally.
fn grid_resolution(res: Resolution, max: Resolution, grid: usize) -> Resolution {
    let scale = |v: u32, m: u32| ((u64::from(v) * grid as u64 + u64::from(m) / 2) / u64::from(m)).max(1) as u32;
    Resolution::new(scale(res.height, max.height), scale(res.width, max.width))
}

struct Evaluator<'a> {
    model: &'a Model,
    max: Resolution,
}

impl Evaluator<'_> {
    fn input(&self, data: &SyntheticDataset, id: SampleId, res: Resolution, augment: Option<u64>) -> Vec<f64> {
        data.input(id, grid_resolution(res, self.max, data.grid()), augment)
    }

    fn accuracy(&self, params: &[f64], holdout: &SyntheticDataset, res: Resolution) -> Result<f64> {
        if holdout.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for id in 0..holdout.len() as SampleId {
            let x = self.input(holdout, id, res, None);
            correct += usize::from(self.model.predict_with(params, &x, holdout.label(id))?.correct);
        }
        Ok(correct as f64 / holdout.len() as f64)
    }
}

/// Trains `model` on `data` for `trainer.total_epochs` epochs using the
/// sampler described by `sampler`. With `set`, easy samples are dropped from
/// the schedule and removed samples are re-evaluated forward-only.
///
/// Every active id is evaluated each epoch: ids the sampler leaves out under
/// `drop_last` get a forward-only pass at the base resolution.
pub fn train(
    model: Model,
    data: &SyntheticDataset,
    holdout: &SyntheticDataset,
    sampler: &ValidConfig,
    trainer: &TrainerConfig,
    set: Option<&SetConfig>,
) -> Result<RunReport> {
    train_with_state(model, data, holdout, sampler, trainer, set).map(|(report, _)| report)
}

/// [`train`], also returning the final SET state when SET is enabled.
pub fn train_with_state(
    model: Model,
    data: &SyntheticDataset,
    holdout: &SyntheticDataset,
    sampler: &ValidConfig,
    trainer: &TrainerConfig,
    set: Option<&SetConfig>,
) -> Result<(RunReport, Option<SetState>)> {
    trainer.validate()?;
    if sampler.dataset_size != data.len() as u64 {
        return Err(Error::IncompatibleConfigs(format!(
            "sampler dataset_size {} but dataset has {} samples",
            sampler.dataset_size,
            data.len()
        )));
    }
    if model.input_dim != data.input_dim() || model.classes != data.classes() {
        return Err(Error::ShapeMismatch {
            expected: model.input_dim,
            actual: data.input_dim(),
        });
    }

    let planner = planner_for(sampler.clone());
    let mut set_state = set.map(|c| SetState::new(sampler.dataset_size, c.clone())).transpose()?;
    let lr = WarmupCosine::from_config(trainer, LR_TICKS);
    let max = sampler.resolutions.max().ok_or(Error::EmptySchedule)?;
    let eval = Evaluator { model: &model, max };
    let base = sampler.base_resolution;
    let eps = trainer.label_smoothing;

    let mut params = model.params.clone();
    let mut velocity = vec![0.0; params.len()];
    let mut shadow = params.clone();
    let mut epochs = Vec::with_capacity(trainer.total_epochs as usize);

    for epoch in 0..trainer.total_epochs {
        let active = set_state.as_ref().map(SetState::active_samples);
        let schedule = planner.plan_epoch(epoch, active.as_deref())?;
        let n_plans = schedule.plans.len() as u64;
        let lr_start = lr.at(epoch * LR_TICKS)?;

        let mut loss_sum = 0.0;
        let mut correct = 0u64;
        let mut trained = 0u64;
        for (i, plan) in schedule.plans.iter().enumerate() {
            let step = epoch * LR_TICKS + i as u64 * LR_TICKS / n_plans;
            let rate = lr.at(step)?;
            let inputs: Vec<Vec<f64>> = plan
                .sample_ids
                .iter()
                .map(|&id| eval.input(data, id, plan.resolution, Some(epoch)))
                .collect();
            let targets: Vec<usize> = plan.sample_ids.iter().map(|&id| data.label(id)).collect();
            let bg = model.batch_loss_grad_with(&params, &inputs, &targets, eps)?;
            loss_sum += bg.mean_loss * inputs.len() as f64;
            for (&id, p) in plan.sample_ids.iter().zip(&bg.predictions) {
                correct += u64::from(p.correct);
                if let Some(s) = set_state.as_mut() {
                    s.record_prediction(id, p.correct, p.confidence)?;
                }
            }
            trained += inputs.len() as u64;
            sgd_momentum_step(&mut params, &bg.grad, &mut velocity, rate, trainer.momentum, trainer.weight_decay)?;
            ema_update(&mut shadow, &params, trainer.ema_decay)?;
        }

        // forward-only passes: ids dropped by drop_last, then SET re-evaluation
        let scheduled: HashSet<SampleId> = schedule.plans.iter().flat_map(|p| p.sample_ids.iter().copied()).collect();
        let leftover: Vec<SampleId> = match &active {
            Some(ids) => ids.iter().copied().filter(|id| !scheduled.contains(id)).collect(),
            None => (0..data.len() as SampleId).filter(|id| !scheduled.contains(id)).collect(),
        };
        let mut seen = trained;
        let mut passes = trained;
        for &id in &leftover {
            let x = eval.input(data, id, base, Some(epoch));
            let p = model.predict_with(&params, &x, data.label(id))?;
            correct += u64::from(p.correct);
            seen += 1;
            passes += 1;
            if let Some(s) = set_state.as_mut() {
                s.record_prediction(id, p.correct, p.confidence)?;
            }
        }

        let (mut removed, mut readded) = (0, 0);
        if let Some(s) = set_state.as_mut() {
            for id in s.reevaluation_plan() {
                let res = if sampler.strategy.is_multi_scale() {
                    let mut rng = SeededRng::new(sampler.seed, StreamKey::new(epoch, u64::from(id), "reeval"));
                    sampler.resolutions.get(rng.draw_choice(sampler.resolutions.len())?).unwrap_or(base)
                } else {
                    base
                };
                let x = eval.input(data, id, res, Some(epoch));
                let p = model.predict_with(&params, &x, data.label(id))?;
                s.record_prediction(id, p.correct, p.confidence)?;
                passes += 1;
            }
            let t = s.finalize_epoch()?;
            removed = s.dataset_size() - t.active_next;
            readded = t.readded.len() as u64;
        }

        epochs.push(EpochStats {
            epoch,
            lr_start,
            train_loss: if trained == 0 { 0.0 } else { loss_sum / trained as f64 },
            train_accuracy: if seen == 0 { 0.0 } else { correct as f64 / seen as f64 },
            updates: n_plans,
            forward_passes: passes,
            active: active.as_ref().map_or(data.len() as u64, |a| a.len() as u64),
            removed,
            readded,
            holdout_accuracy: eval.accuracy(&params, holdout, base)?,
            ema_holdout_accuracy: eval.accuracy(&shadow, holdout, base)?,
        });
    }

    let counters = set_state.as_ref().map(SetState::counters).unwrap_or_default();
    let last = epochs.last();
    let report = RunReport {
        schema_version: RUN_SCHEMA_VERSION,
        total_updates: epochs.iter().map(|e| e.updates).sum(),
        total_forward_passes: epochs.iter().map(|e| e.forward_passes).sum(),
        removed_count: counters.removed_count,
        readded_count: counters.readded_count,
        final_accuracy: last.map_or(0.0, |e| e.holdout_accuracy),
        final_ema_accuracy: last.map_or(0.0, |e| e.ema_holdout_accuracy),
        epochs,
        final_params: params,
        ema_params: shadow,
    };
    Ok((report, set_state))
}
