//! Command-line front end.
//!
//! Settings resolve in increasing precedence: preset, `BATCHFORGE_SEED`,
//! config file, flags.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{apply_baseline, compare_strategies, cost_from_schedules, write_reports_csv, write_reports_json};
use crate::config::{validate_config, Strategy, ValidConfig};
use crate::error::{Error, Result};
use crate::presets::SyntheticRecipe;
use crate::samplers::{planner_for, read_schedule_jsonl, shard_for_rank, EpochSchedule, ScheduleWriter};
use crate::set::{SetConfig, SetState};
use crate::settings::{parse_config_text, Settings, SEED_ENV};
use crate::trainer::{train_with_state, write_params, TrainerConfig};


#[derive(Debug, Parser)]
#[command(name = "batchforge", version, about = "Multi-scale batch schedules, SET and training-cost accounting")]
pub struct Cli {
    /// Print configuration errors as JSON on stderr.
    #[arg(long, global = true)]
    pub errors_json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate epoch schedules as JSONL.
    Plan(PlanArgs),
    /// Compare update counts and input memory across strategies.
    Analyze(AnalyzeArgs),
    /// Train the synthetic model, optionally with SET.
    Train(TrainArgs),
    /// Per-epoch CSV from a SET checkpoint.
    SetReport(SetReportArgs),
    /// Re-export an imported JSONL schedule.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Every settings key is also a flag (`seed` becomes `--seed`).
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// Named preset to start from.
    #[arg(long)]
    pub preset: Option<String>,
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub dataset_size: Option<String>,
    #[arg(long)]
    pub base_batch: Option<String>,
    #[arg(long)]
    pub base_resolution: Option<String>,
    /// Comma-separated, e.g. `128,192,224` or `256x192,...`.
    #[arg(long, allow_hyphen_values = true)]
    pub resolutions: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub world_size: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub drop_last: Option<String>,
    #[arg(long)]
    pub batch_rounding: Option<String>,
    #[arg(long)]
    pub min_batch: Option<String>,
    #[arg(long)]
    pub video_frames: Option<String>,
    #[arg(long)]
    pub video_clips: Option<String>,
    #[arg(long)]
    pub video_base_frames: Option<String>,
    #[arg(long)]
    pub video_base_clips: Option<String>,
    #[arg(long)]
    pub max_lr: Option<String>,
    #[arg(long)]
    pub warmup_epochs: Option<String>,
    #[arg(long)]
    pub total_epochs: Option<String>,
    #[arg(long)]
    pub min_lr: Option<String>,
    #[arg(long)]
    pub momentum: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<String>,
    #[arg(long)]
    pub label_smoothing: Option<String>,
    #[arg(long)]
    pub ema_decay: Option<String>,
    #[arg(long)]
    pub set_tau: Option<String>,
    #[arg(long)]
    pub set_window: Option<String>,
    #[arg(long)]
    pub set_start_epoch: Option<String>,
    #[arg(long)]
    pub set_reeval_stride: Option<String>,
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub bytes_per_element: Option<String>,
}

impl ConfigArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, &str)> {
        let all: [(&'static str, &Option<String>); 29] = [
            ("strategy", &self.strategy),
            ("dataset_size", &self.dataset_size),
            ("base_batch", &self.base_batch),
            ("base_resolution", &self.base_resolution),
            ("resolutions", &self.resolutions),
            ("epochs", &self.epochs),
            ("world_size", &self.world_size),
            ("seed", &self.seed),
            ("drop_last", &self.drop_last),
            ("batch_rounding", &self.batch_rounding),
            ("min_batch", &self.min_batch),
            ("video_frames", &self.video_frames),
            ("video_clips", &self.video_clips),
            ("video_base_frames", &self.video_base_frames),
            ("video_base_clips", &self.video_base_clips),
            ("max_lr", &self.max_lr),
            ("warmup_epochs", &self.warmup_epochs),
            ("total_epochs", &self.total_epochs),
            ("min_lr", &self.min_lr),
            ("momentum", &self.momentum),
            ("weight_decay", &self.weight_decay),
            ("label_smoothing", &self.label_smoothing),
            ("ema_decay", &self.ema_decay),
            ("set_tau", &self.set_tau),
            ("set_window", &self.set_window),
            ("set_start_epoch", &self.set_start_epoch),
            ("set_reeval_stride", &self.set_reeval_stride),
            ("channels", &self.channels),
            ("bytes_per_element", &self.bytes_per_element),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    /// Resolves the effective settings. `env_seed` is the value of
    /// `BATCHFORGE_SEED`, passed in so tests need not touch the environment.
    pub fn resolve(&self, default_preset: &str, env_seed: Option<&str>) -> Result<Settings> {
        let file_pairs = match &self.config {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        let file_preset = file_pairs.iter().find(|(k, _)| k == "preset").map(|(_, v)| v.as_str());
        let preset = self.preset.as_deref().or(file_preset).unwrap_or(default_preset);
        let mut settings = Settings::from_preset(preset)?;
        if let Some(seed) = env_seed {
            settings.apply("seed", seed)?;
        }
        settings.apply_all(
            file_pairs
                .iter()
                .filter(|(k, _)| k != "preset")
                .map(|(k, v)| (k.as_str(), v.as_str())),
        )?;
        settings.apply_all(self.flag_pairs())?;
        Ok(settings)
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write ids as half-open ranges.
    #[arg(long)]
    pub compact: bool,
    /// Emit only this rank's shard.
    #[arg(long)]
    pub rank: Option<u32>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Comma-separated strategies; defaults to the three image samplers.
    #[arg(long)]
    pub strategies: Option<String>,
    /// Analyze an exported schedule instead of generating one.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the SET state here.
    #[arg(long)]
    pub set_checkpoint: Option<PathBuf>,
    /// Also write the final parameters here.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SetReportArgs {
    /// SET checkpoint written by `train --set-checkpoint`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// JSONL schedule to import.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub compact: bool,
    #[arg(long)]
    pub rank: Option<u32>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Errors that mean "fix your configuration" (exit code 2).
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::UnknownPreset(_)
            | Error::UnknownName(_)
            | Error::Parse(_)
            | Error::InvalidSetConfig(_)
            | Error::InvalidTrainerConfig(_)
            | Error::IncompatibleConfigs(_)
            | Error::RankOutOfRange { .. }
    )
}

#[derive(Serialize)]
struct ErrorEntry<'a> {
    code: &'a str,
    message: String,
}

/// Machine-readable form of `e`: one entry per config violation.
pub fn errors_json(e: &Error) -> String {
    let entries: Vec<ErrorEntry> = match e {
        Error::Config(errs) => errs
            .0
            .iter()
            .map(|v| ErrorEntry {
                code: v.code(),
                message: v.to_string(),
            })
            .collect(),
        other => vec![ErrorEntry {
            code: other.code(),
            message: other.to_string(),
        }],
    };
    serde_json::json!({ "errors": entries }).to_string()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok().filter(|s| !s.trim().is_empty())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan(args) => plan(args),
        Command::Analyze(args) => analyze(args),
        Command::Train(args) => train_cmd(args),
        Command::SetReport(args) => set_report(args),
        Command::Export(args) => export(args),
    }
}

fn maybe_shard(schedule: EpochSchedule, rank: Option<u32>, world: u32) -> Result<EpochSchedule> {
    match rank {
        Some(r) => shard_for_rank(&schedule, r, world),
        None => Ok(schedule),
    }
}

fn plan(args: PlanArgs) -> Result<()> {
    let settings = args.config.resolve("resnet50", env_seed().as_deref())?;
    let config = validate_config(settings.sampler)?;
    if let Some(rank) = args.rank {
        if rank >= config.world_size {
            return Err(Error::RankOutOfRange {
                rank,
                world_size: config.world_size,
            });
        }
    }
    let planner = planner_for(config.clone());
    let mut w = ScheduleWriter::new(open_output(args.output.as_deref())?, args.compact);
    w.write_header(&config)?;
    for epoch in 0..config.epochs {
        let schedule = maybe_shard(planner.plan_epoch(epoch, None)?, args.rank, config.world_size)?;
        w.write_epoch(&schedule)?;
    }
    w.finish()?.flush()?;
    Ok(())
}

fn parse_strategies(list: Option<&str>, config: &ValidConfig) -> Result<Vec<Strategy>> {
    match list {
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("strategies: {e}"))))
            .collect(),
        None => {
            let mut v = vec![Strategy::SscFbs, Strategy::MscFbs, Strategy::MscVbs];
            if config.video.is_some() {
                v.push(Strategy::VideoVbs);
            }
            Ok(v)
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let (config, memory, reports) = match &args.schedule {
        Some(path) => {
            let imported = read_schedule_jsonl(BufReader::new(File::open(path)?))?;
            let header = imported
                .config
                .ok_or_else(|| Error::Parse("schedule has no config header".into()))?;
            let valid = validate_config(header)?;
            let memory = args.config.resolve("resnet50", None)?.memory;
            let mut reports = vec![cost_from_schedules(valid.strategy, &imported.epochs, Some(&valid), memory)?];
            apply_baseline(&mut reports, &valid, memory)?;
            (valid.into_inner(), memory, reports)
        }
        None => {
            let settings = args.config.resolve("resnet50", env_seed().as_deref())?;
            let valid = validate_config(settings.sampler)?;
            let strategies = parse_strategies(args.strategies.as_deref(), &valid)?;
            let reports = compare_strategies(&valid, &strategies, settings.memory)?;
            (valid.into_inner(), settings.memory, reports)
        }
    };
    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Json => {
            write_reports_json(&config, memory, &reports, &mut out)?;
            writeln!(out)?;
        }
        Format::Csv => write_reports_csv(&reports, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrainEnvelope<'a> {
    schema_version: u64,
    sampler: &'a ValidConfig,
    trainer: &'a TrainerConfig,
    set: Option<&'a SetConfig>,
    report: &'a crate::trainer::RunReport,
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let settings = args.config.resolve("synthetic", env_seed().as_deref())?;
    let config = validate_config(settings.sampler)?;
    settings.trainer.validate()?;
    if let Some(s) = &settings.set {
        s.validate()?;
    }
    let recipe = SyntheticRecipe::default();
    let (data, holdout) = recipe.datasets(config.dataset_size as usize, config.seed)?;
    let model = recipe.model(&data);
    let (report, set_state) = train_with_state(
        model.clone(),
        &data,
        &holdout,
        &config,
        &settings.trainer,
        settings.set.as_ref(),
    )?;

    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Json => {
            let env = TrainEnvelope {
                schema_version: crate::trainer::RUN_SCHEMA_VERSION,
                sampler: &config,
                trainer: &settings.trainer,
                set: settings.set.as_ref(),
                report: &report,
            };
            serde_json::to_writer_pretty(&mut out, &env)?;
            writeln!(out)?;
        }
        Format::Csv => report.write_epochs_csv(&mut out)?,
    }
    out.flush()?;

    if let Some(path) = &args.set_checkpoint {
        let state = set_state.ok_or_else(|| Error::Parse("--set-checkpoint needs SET enabled (set a set_* key)".into()))?;
        state.write_checkpoint(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &args.params {
        let mut w = BufWriter::new(File::create(path)?);
        write_params(&model, &report.final_params, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn set_report(args: SetReportArgs) -> Result<()> {
    let state = SetState::read_checkpoint(BufReader::new(File::open(&args.checkpoint)?))?;
    let mut out = open_output(args.output.as_deref())?;
    state.write_report_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let imported = read_schedule_jsonl(BufReader::new(File::open(&args.input)?))?;
    let world = imported.config.as_ref().map_or(1, |c| c.world_size);
    if let Some(rank) = args.rank {
        if rank >= world {
            return Err(Error::RankOutOfRange { rank, world_size: world });
        }
    }
    let mut w = ScheduleWriter::new(open_output(args.output.as_deref())?, args.compact);
    if let Some(c) = &imported.config {
        w.write_header(c)?;
    }
    for schedule in imported.epochs {
        w.write_epoch(&maybe_shard(schedule, args.rank, world)?)?;
    }
    w.finish()?.flush()?;
    Ok(())
}
