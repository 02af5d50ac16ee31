//! Deterministic multi-scale batch schedules, sample-efficient training (SET)
//! and training-cost accounting.
//!
//! ```
//! use batchforge::config::{validate_config, Strategy};
//! use batchforge::presets::load_preset;
//! use batchforge::analysis::count_updates;
//!
//! let (mut sampler, _) = load_preset("resnet50").unwrap();
//! sampler.strategy = Strategy::SscFbs;
//! let updates = count_updates(&validate_config(sampler).unwrap());
//! assert_eq!(updates.exact, 1251 * 150);
//! ```

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod presets;
pub mod registry;
pub mod rng;
pub mod samplers;
pub mod set;
pub mod settings;
pub mod trainer;

pub use error::{ConfigErrors, ConfigViolation, Error, Result};
