use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mocap_doppler::dsp::PreprocessConfig;
use mocap_doppler::model::{ModelConfig, Variant};
use mocap_doppler::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::args::GlobalArgs;

/// Everything a subcommand may be configured with. Read from `--config`,
/// then overridden by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub variant: Variant,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("config file {}", path.display()))
    }

    /// Defaults, then the config file, then the global flags.
    pub fn resolve(global: &GlobalArgs) -> Result<Self> {
        let mut s = match &global.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(seed) = global.seed {
            s.train.seed = seed;
        }
        if let Some(e) = global.epochs {
            s.train.epochs = e;
        }
        if let Some(b) = global.batch {
            s.train.batch_size = b;
        }
        if let Some(v) = &global.variant {
            s.variant = v.parse()?;
        }
        Ok(s)
    }
}

/// The resolved configuration of one invocation, printed before any work so
/// the run can be repeated from it.
#[derive(Debug, Serialize)]
pub struct Echo<'a> {
    pub command: &'a str,
    pub args: BTreeMap<&'static str, String>,
    #[serde(flatten)]
    pub sections: BTreeMap<&'static str, toml::Value>,
}

impl<'a> Echo<'a> {
    pub fn new(command: &'a str) -> Self {
        Self {
            command,
            args: BTreeMap::new(),
            sections: BTreeMap::new(),
        }
    }

    pub fn arg(mut self, key: &'static str, value: impl ToString) -> Self {
        self.args.insert(key, value.to_string());
        self
    }

    pub fn path(self, key: &'static str, value: &Path) -> Self {
        self.arg(key, value.display())
    }

    pub fn section(mut self, key: &'static str, value: &impl Serialize) -> Result<Self> {
        self.sections.insert(key, toml::Value::try_from(value)?);
        Ok(self)
    }

    pub fn render(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn print(&self) -> Result<String> {
        let text = self.render()?;
        println!("# resolved configuration\n{text}");
        Ok(text)
    }
}
