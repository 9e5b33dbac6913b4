//! JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use chaosx_core::asympt::{ConstantRequest, Model, ProcessModel};
use chaosx_core::constants::{PickandsOptions, PiterbargOptions};
use chaosx_core::mc::GridStep;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable overriding the constants cache path.
pub const CACHE_ENV: &str = "CHAOSX_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default)]
    pub u_list: Vec<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub grid_step: GridStep,
    #[serde(default)]
    pub seed: u64,
    /// Directory receiving `comp_<i>.csv` for one sample path of `validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_paths: Option<PathBuf>,
}

fn default_samples() -> usize {
    100_000
}

impl Default for RunBlock {
    fn default() -> Self {
        Self { u_list: Vec::new(), n_samples: default_samples(), grid_step: GridStep::Auto, seed: 0, dump_paths: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    /// Cache file, relative to the directory of the config file.
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default)]
    pub pickands: PickandsOptions,
    #[serde(default)]
    pub piterbarg: PiterbargOptions,
    /// Constants to estimate; derived from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests: Option<Vec<ConstantRequest>>,
}

fn default_cache() -> PathBuf {
    PathBuf::from("chaosx_constants.json")
}

impl Default for ConstantsBlock {
    fn default() -> Self {
        Self { cache: default_cache(), pickands: PickandsOptions::default(), piterbarg: PiterbargOptions::default(), requests: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailBlock {
    pub x_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotBlock {
    #[serde(default)]
    pub log_y: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ProcessModel>,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub constants: ConstantsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailBlock>,
    #[serde(default)]
    pub plot: PlotBlock,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("config error at `{path}`: {}", e.into_inner()))
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// A parsed config with its model validated and analyzed.
pub struct Loaded {
    pub config: RunConfig,
    pub model: Option<Model>,
    pub cache_path: PathBuf,
}

impl Loaded {
    pub fn model(&self, command: &str) -> Result<&Model, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config(format!("config error at `model`: the {command} command needs a model block")))
    }

    pub fn u_list(&self, command: &str) -> Result<&[f64], CliError> {
        let u = &self.config.run.u_list;
        if u.is_empty() {
            return Err(CliError::Config(format!("config error at `run.u_list`: the {command} command needs at least one threshold")));
        }
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("config error at `run.u_list`: threshold {bad} is not finite")));
        }
        Ok(u)
    }
}

/// Reads, parses and validates the config; every cross-field rule of the
/// model is checked here.
pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = RunConfig::from_json(&text)?;
    let model = match &config.model {
        Some(spec) => Some(Model::new(spec.clone()).map_err(|e| CliError::Config(format!("config error at `model`: {e}")))?),
        None => None,
    };
    let cache_path = match std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        Some(p) => PathBuf::from(p),
        None if config.constants.cache.is_absolute() => config.constants.cache.clone(),
        None => path.parent().unwrap_or(Path::new("")).join(&config.constants.cache),
    };
    Ok(Loaded { config, model, cache_path })
}
