//! Named sampler factories, so strategies can be picked by string from a
//! config file or the command line and new ones plugged in by callers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::config::{Strategy, ValidConfig};
use crate::error::{Error, Result};
use crate::samplers::{EpochPlanner, ImagePlanner, VideoPlanner};

pub type StrategyFactory = Arc<dyn Fn(ValidConfig) -> Box<dyn EpochPlanner> + Send + Sync>;

#[derive(Clone, Default)]
pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl StrategyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding the four built-in strategies under their
    /// [`Strategy::name`]s.
    pub fn with_builtin() -> Self {
        let mut reg = Self::new();
        for &s in Strategy::ALL {
            let factory: StrategyFactory = match s {
                Strategy::VideoVbs => Arc::new(|c| Box::new(VideoPlanner::from_config(c))),
                _ => Arc::new(move |c| Box::new(ImagePlanner::new(c, s))),
            };
            // names are distinct by construction
            let _ = reg.register(s.name(), factory);
        }
        reg
    }

    pub fn register(&mut self, name: &str, factory: StrategyFactory) -> Result<()> {
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if self.factories.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.factories.insert(name.to_string(), factory);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Result<StrategyFactory> {
        self.factories
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}
