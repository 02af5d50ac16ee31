//! Optimizer-update and input-memory accounting across sampling strategies.
//!
//! Memory is the input tensor only: `batch * channels * frames * clips * H * W`
//! elements per iteration. Activations and optimizer state are not modeled.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{validate_config, SamplerConfig, Strategy, ValidConfig};
use crate::error::{Error, Result};
use crate::rng::{SeededRng, StreamKey};
use crate::samplers::{planner_for, EpochSchedule, ImagePlanner, VideoPlanner};

pub const REPORT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateCount {
    /// Sum of plan counts over all epochs, from the actual generator.
    pub exact: u64,
    pub closed_form: f64,
}

/// Mean global batch over the draw set; the fixed batch for fixed strategies.
pub fn expected_batch(config: &ValidConfig) -> f64 {
    let mean = |b: Vec<u64>| b.iter().sum::<u64>() as f64 / b.len().max(1) as f64;
    match config.strategy {
        Strategy::SscFbs | Strategy::MscFbs => config.global_batch() as f64,
        Strategy::MscVbs => mean(
            ImagePlanner::new(config.clone(), Strategy::MscVbs)
                .batch_table()
                .map(|(_, b)| b)
                .collect(),
        ),
        Strategy::VideoVbs => mean(
            VideoPlanner::from_config(config.clone())
                .batch_table()
                .map(|(_, b)| b)
                .collect(),
        ),
    }
}

/// Closed-form updates for one epoch over `active` ids: `floor`/`ceil` of
/// `N / b` for fixed batches, `N / E[b_t]` for variable ones.
pub fn expected_updates_per_epoch(config: &ValidConfig, active: u64) -> f64 {
    if config.strategy.is_variable_batch() {
        active as f64 / expected_batch(config)
    } else {
        let b = config.global_batch();
        if config.drop_last {
            (active / b) as f64
        } else {
            active.div_ceil(b) as f64
        }
    }
}

pub fn count_updates(config: &ValidConfig) -> UpdateCount {
    let planner = planner_for(config.clone());
    let exact = (0..config.epochs)
        .map(|e| planner.plan_shapes(e, config.dataset_size).len() as u64)
        .sum();
    UpdateCount {
        exact,
        closed_form: config.epochs as f64 * expected_updates_per_epoch(config, config.dataset_size),
    }
}

/// Rounds to thousands the way update counts are usually quoted: `"188k"`.
pub fn format_thousands(n: f64) -> String {
    format!("{}k", (n / 1000.0).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec {
    pub channels: u64,
    pub bytes_per_element: u64,
}

impl Default for MemorySpec {
    /// RGB, fp32.
    fn default() -> Self {
        Self {
            channels: 3,
            bytes_per_element: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryProxy {
    pub peak_bytes: u64,
    pub mean_bytes: f64,
}

/// Running peak/mean of per-iteration input elements (`batch * volume`).
#[derive(Debug, Clone, Copy, Default)]
struct PixelStats {
    peak: u64,
    sum: u128,
    count: u64,
}

impl PixelStats {
    fn push(&mut self, batch: u64, volume: u64) {
        let px = batch * volume;
        self.peak = self.peak.max(px);
        self.sum += u128::from(px);
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }
}

pub fn input_memory_proxy(
    schedule: &EpochSchedule,
    channels: u64,
    bytes_per_element: u64,
) -> Result<MemoryProxy> {
    if schedule.plans.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut stats = PixelStats::default();
    for p in &schedule.plans {
        stats.push(p.batch_size, p.sample_volume());
    }
    let scale = channels * bytes_per_element;
    Ok(MemoryProxy {
        peak_bytes: stats.peak * scale,
        mean_bytes: stats.mean() * scale as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub updates_ratio: f64,
    pub peak_pixels_ratio: f64,
}

/// One row of a strategy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub strategy: Strategy,
    pub total_updates: u64,
    pub expected_updates: f64,
    /// Max over iterations of `batch * channels * volume`.
    pub peak_input_pixels: u64,
    pub mean_input_pixels: f64,
    pub peak_input_bytes: u64,
    pub mean_input_bytes: f64,
    pub ratios_vs_baseline: Ratios,
}

impl CostReport {
    pub fn updates_k(&self) -> String {
        format_thousands(self.total_updates as f64)
    }

    fn build(
        strategy: Strategy,
        total_updates: u64,
        expected_updates: f64,
        stats: PixelStats,
        memory: MemorySpec,
    ) -> Self {
        let peak_px = stats.peak * memory.channels;
        let mean_px = stats.mean() * memory.channels as f64;
        Self {
            strategy,
            total_updates,
            expected_updates,
            peak_input_pixels: peak_px,
            mean_input_pixels: mean_px,
            peak_input_bytes: peak_px * memory.bytes_per_element,
            mean_input_bytes: mean_px * memory.bytes_per_element as f64,
            ratios_vs_baseline: Ratios {
                updates_ratio: 1.0,
                peak_pixels_ratio: 1.0,
            },
        }
    }

    fn set_baseline(&mut self, baseline: &CostReport) {
        self.ratios_vs_baseline = Ratios {
            updates_ratio: self.total_updates as f64 / baseline.total_updates.max(1) as f64,
            peak_pixels_ratio: self.peak_input_pixels as f64
                / baseline.peak_input_pixels.max(1) as f64,
        };
    }
}

/// Cost of a full run (all epochs, all ids) of `config` with its own strategy.
pub fn cost_report(config: &ValidConfig, memory: MemorySpec) -> CostReport {
    let planner = planner_for(config.clone());
    let mut stats = PixelStats::default();
    let mut updates = 0u64;
    for e in 0..config.epochs {
        for s in planner.plan_shapes(e, config.dataset_size) {
            stats.push(s.batch_size, s.sample_volume());
            updates += 1;
        }
    }
    let expected = config.epochs as f64 * expected_updates_per_epoch(config, config.dataset_size);
    CostReport::build(config.strategy, updates, expected, stats, memory)
}

/// Cost of already generated (e.g. imported) schedules. `expected_updates`
/// comes from `config` when given, otherwise equals the exact count.
pub fn cost_from_schedules(
    strategy: Strategy,
    schedules: &[EpochSchedule],
    config: Option<&ValidConfig>,
    memory: MemorySpec,
) -> Result<CostReport> {
    let mut stats = PixelStats::default();
    let mut updates = 0u64;
    for s in schedules {
        for p in &s.plans {
            stats.push(p.batch_size, p.sample_volume());
            updates += 1;
        }
    }
    if updates == 0 {
        return Err(Error::EmptySchedule);
    }
    let expected = config.map_or(updates as f64, |c| {
        schedules.len() as f64 * expected_updates_per_epoch(c, c.dataset_size)
    });
    Ok(CostReport::build(strategy, updates, expected, stats, memory))
}

fn baseline_config(config: &SamplerConfig) -> Result<ValidConfig> {
    Ok(validate_config(config.clone().with_strategy(Strategy::SscFbs))?)
}

/// Sets every row's ratios against the single-scale fixed-batch run of
/// `config`, computed here if it is not among the rows.
pub fn apply_baseline(reports: &mut [CostReport], config: &SamplerConfig, memory: MemorySpec) -> Result<()> {
    let baseline = match reports.iter().find(|r| r.strategy == Strategy::SscFbs) {
        Some(r) => r.clone(),
        None => cost_report(&baseline_config(config)?, memory),
    };
    for r in reports.iter_mut() {
        r.set_baseline(&baseline);
    }
    Ok(())
}

/// One report per strategy, all sharing `base`'s dataset, epochs and batch
/// recipe, with ratios against single-scale fixed batch.
pub fn compare_strategies(
    base: &SamplerConfig,
    strategies: &[Strategy],
    memory: MemorySpec,
) -> Result<Vec<CostReport>> {
    let configs: Vec<SamplerConfig> = strategies
        .iter()
        .map(|&s| base.clone().with_strategy(s))
        .collect();
    compare_configs(&configs, memory)
}

/// Like [`compare_strategies`] for explicit configs, which must agree on
/// dataset size, epochs, base batch, base resolution and world size.
pub fn compare_configs(configs: &[SamplerConfig], memory: MemorySpec) -> Result<Vec<CostReport>> {
    let Some(first) = configs.first() else {
        return Ok(Vec::new());
    };
    for c in &configs[1..] {
        let mismatch = [
            ("dataset_size", c.dataset_size != first.dataset_size),
            ("epochs", c.epochs != first.epochs),
            ("base_batch", c.base_batch != first.base_batch),
            ("base_resolution", c.base_resolution != first.base_resolution),
            ("world_size", c.world_size != first.world_size),
        ]
        .into_iter()
        .find(|(_, differs)| *differs);
        if let Some((field, _)) = mismatch {
            return Err(Error::IncompatibleConfigs(format!("{field} differs")));
        }
    }
    let mut reports = configs
        .iter()
        .map(|c| Ok(cost_report(&validate_config(c.clone())?, memory)))
        .collect::<Result<Vec<_>>>()?;
    apply_baseline(&mut reports, first, memory)?;
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub mean: f64,
    /// Standard error of the mean; `None` for a single trial.
    pub stderr: Option<f64>,
}

/// Monte-Carlo total updates over `trials` independently seeded runs.
pub fn simulate_updates(config: &ValidConfig, trials: u64) -> Result<SimulationSummary> {
    if trials == 0 {
        return Err(Error::Parse("trials must be at least 1".into()));
    }
    let totals: Vec<f64> = (0..trials)
        .map(|t| {
            let mut c = config.clone().into_inner();
            c.seed = SeededRng::new(config.seed, StreamKey::new(0, t, "trial")).next_u64();
            let c = validate_config(c).map_err(Error::from)?;
            Ok(count_updates(&c).exact as f64)
        })
        .collect::<Result<_>>()?;
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let stderr = (trials > 1).then(|| {
        let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(SimulationSummary {
        trials,
        mean,
        stderr,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    strategy: &'a str,
    updates: u64,
    updates_ratio: f64,
    peak_input_bytes: u64,
    peak_ratio: f64,
    updates_k: String,
    expected_updates: f64,
    mean_input_bytes: f64,
}

/// `strategy,updates,updates_ratio,peak_input_bytes,peak_ratio,...` with
/// ratios printed to two decimals.
pub fn write_reports_csv<W: Write>(reports: &[CostReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let round2 = |x: f64| (x * 100.0).round() / 100.0;
    for r in reports {
        w.serialize(CsvRow {
            strategy: r.strategy.name(),
            updates: r.total_updates,
            updates_ratio: round2(r.ratios_vs_baseline.updates_ratio),
            peak_input_bytes: r.peak_input_bytes,
            peak_ratio: round2(r.ratios_vs_baseline.peak_pixels_ratio),
            updates_k: r.updates_k(),
            expected_updates: r.expected_updates.round(),
            mean_input_bytes: r.mean_input_bytes.round(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u64,
    config: &'a SamplerConfig,
    memory: MemorySpec,
    reports: &'a [CostReport],
}

pub fn write_reports_json<W: Write>(
    config: &SamplerConfig,
    memory: MemorySpec,
    reports: &[CostReport],
    out: W,
) -> Result<()> {
    serde_json::to_writer_pretty(
        out,
        &JsonReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config,
            memory,
            reports,
        },
    )?;
    Ok(())
}
