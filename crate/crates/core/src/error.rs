use std::fmt;

use thiserror::Error;

use crate::config::Resolution;

/// A single violated invariant of a [`SamplerConfig`](crate::config::SamplerConfig).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigViolation {
    #[error("resolution set is empty")]
    EmptyResolutionSet,
    #[error("resolutions must be strictly ascending by pixel count ({previous} then {next})")]
    UnsortedResolutions { previous: Resolution, next: Resolution },
    #[error("resolution {0} has a zero dimension")]
    ZeroDimension(Resolution),
    #[error("base resolution {0} is not in the resolution set")]
    BaseResNotInSet(Resolution),
    #[error("base_batch and min_batch must be positive")]
    ZeroBatch,
    #[error("min_batch {min_batch} exceeds base_batch {base_batch}")]
    MinBatchExceedsBatch { min_batch: u64, base_batch: u64 },
    #[error("dataset_size must be positive")]
    ZeroDatasetSize,
    #[error("dataset_size {dataset_size} is smaller than one global batch of {global_batch}")]
    DatasetTooSmall { dataset_size: u64, global_batch: u64 },
    #[error("epochs must be positive")]
    ZeroEpochs,
    #[error("world_size must be positive")]
    ZeroWorldSize,
    #[error("video strategy requires video settings")]
    MissingVideoSettings,
    #[error("video frame and clip counts must be non-empty and positive")]
    InvalidVideoSettings,
}

impl ConfigViolation {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigViolation::EmptyResolutionSet => "EMPTY_RESOLUTION_SET",
            ConfigViolation::UnsortedResolutions { .. } => "UNSORTED_RESOLUTIONS",
            ConfigViolation::ZeroDimension(_) => "ZERO_DIMENSION",
            ConfigViolation::BaseResNotInSet(_) => "BASE_RES_NOT_IN_SET",
            ConfigViolation::ZeroBatch => "ZERO_BATCH",
            ConfigViolation::MinBatchExceedsBatch { .. } => "MIN_BATCH_EXCEEDS_BATCH",
            ConfigViolation::ZeroDatasetSize => "ZERO_DATASET_SIZE",
            ConfigViolation::DatasetTooSmall { .. } => "DATASET_TOO_SMALL",
            ConfigViolation::ZeroEpochs => "ZERO_EPOCHS",
            ConfigViolation::ZeroWorldSize => "ZERO_WORLD_SIZE",
            ConfigViolation::MissingVideoSettings => "MISSING_VIDEO_SETTINGS",
            ConfigViolation::InvalidVideoSettings => "INVALID_VIDEO_SETTINGS",
        }
    }
}

/// The complete list of violations found by [`validate_config`](crate::config::validate_config).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigViolation>);

impl ConfigErrors {
    pub fn codes(&self) -> Vec<&'static str> {
        self.0.iter().map(ConfigViolation::code).collect()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.0.iter().any(|v| v.code() == code)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.code(), v)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigErrors),
    #[error("cannot draw from an empty set")]
    ZeroSetSize,
    #[error("strategy name must be non-empty")]
    EmptyName,
    #[error("strategy {0:?} is already registered")]
    DuplicateName(String),
    #[error("unknown strategy {0:?}")]
    UnknownName(String),
    #[error("active id {id} is out of range or repeated (dataset_size {dataset_size})")]
    InvalidActiveIds { id: u32, dataset_size: u64 },
    #[error("rank {rank} out of range for world size {world_size}")]
    RankOutOfRange { rank: u32, world_size: u32 },
    #[error("batch size {batch_size} at iteration {iteration} is not divisible by world size {world_size}")]
    IndivisibleBatch { iteration: u64, batch_size: u64, world_size: u32 },
    #[error("unknown sample {0}")]
    UnknownSample(u32),
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("{} active samples have no prediction for this epoch (first: {:?})", .0.len(), .0.first())]
    MissingRecords(Vec<u32>),
    #[error("invalid SET config: {0}")]
    InvalidSetConfig(String),
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("configs cannot be compared: {0}")]
    IncompatibleConfigs(String),
    #[error("step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("invalid trainer config: {0}")]
    InvalidTrainerConfig(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "INVALID_CONFIG",
            Error::ZeroSetSize => "ZERO_SET_SIZE",
            Error::EmptyName => "EMPTY_NAME",
            Error::DuplicateName(_) => "DUPLICATE_NAME",
            Error::UnknownName(_) => "UNKNOWN_NAME",
            Error::InvalidActiveIds { .. } => "INVALID_ACTIVE_IDS",
            Error::RankOutOfRange { .. } => "RANK_OUT_OF_RANGE",
            Error::IndivisibleBatch { .. } => "INDIVISIBLE_BATCH",
            Error::UnknownSample(_) => "UNKNOWN_SAMPLE",
            Error::ConfidenceOutOfRange(_) => "CONFIDENCE_OUT_OF_RANGE",
            Error::MissingRecords(_) => "MISSING_RECORDS",
            Error::InvalidSetConfig(_) => "INVALID_SET_CONFIG",
            Error::EmptySchedule => "EMPTY_SCHEDULE",
            Error::IncompatibleConfigs(_) => "INCOMPATIBLE_CONFIGS",
            Error::StepOutOfRange { .. } => "STEP_OUT_OF_RANGE",
            Error::NonFiniteInput => "NON_FINITE_INPUT",
            Error::TargetOutOfRange { .. } => "TARGET_OUT_OF_RANGE",
            Error::ShapeMismatch { .. } => "SHAPE_MISMATCH",
            Error::InvalidTrainerConfig(_) => "INVALID_TRAINER_CONFIG",
            Error::UnknownPreset(_) => "UNKNOWN_PRESET",
            Error::Parse(_) => "PARSE_ERROR",
            Error::SchemaVersion(_) => "SCHEMA_VERSION",
            Error::Io(_) => "IO_ERROR",
            Error::Json(_) => "JSON_ERROR",
            Error::Csv(_) => "CSV_ERROR",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
