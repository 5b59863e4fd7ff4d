//! Layered run configuration: built-in defaults < JSON config file < flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use transit_core::baselines::GaConfig;
use transit_core::designenv::EnvConfig;
use transit_core::learner::TrainRunConfig;
use transit_core::search::SearchConfig;

/// Environment variable naming the directory under which commands create
/// their default output directories.
pub const OUTPUT_ROOT_VAR: &str = "TRANSIT_DESIGN_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: Option<PathBuf>,
    pub env: EnvConfig,
    /// Used by every search-based designer and by training.
    pub search: SearchConfig,
    pub train: TrainRunConfig,
    pub ga: GaConfig,
    /// Independent pure-MCTS searches per design.
    pub workers: usize,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_alpha(EnvConfig::default().alpha)
    }
}

impl RunConfig {
    pub fn for_alpha(alpha: f64) -> Self {
        let train = TrainRunConfig::for_alpha(alpha);
        Self {
            network: None,
            env: EnvConfig {
                alpha,
                ..EnvConfig::default()
            },
            search: train.search.clone(),
            workers: train.workers,
            train,
            ga: GaConfig::default(),
            seeds: vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate().context("env")?;
        self.search.validate().context("search")?;
        self.train.validate().context("train")?;
        self.ga.validate().context("ga")?;
        if self.workers == 0 {
            bail!("workers must be >= 1");
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Recursively overlays `top` onto `base`; objects merge key by key, every
/// other value replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `a.b.c=value`. The value is read as JSON when possible and as a
/// plain string otherwise.
pub fn parse_override(text: &str) -> Result<(Vec<String>, Value)> {
    let (path, raw) = text
        .split_once('=')
        .with_context(|| format!("override `{text}` must look like key.path=value"))?;
    if path.is_empty() {
        bail!("override `{text}` has an empty key");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path.split('.').map(str::to_string).collect(), value))
}

fn nest(path: &[String], value: Value) -> Value {
    path.iter()
        .rev()
        .fold(value, |acc, key| Value::Object([(key.clone(), acc)].into_iter().collect()))
}

/// Builds the resolved configuration. `alpha` selects the alpha-dependent
/// defaults; it is taken from the overrides, then the file, then the
/// built-in default.
pub fn resolve(file: Option<&Path>, overrides: &[(Vec<String>, Value)]) -> Result<RunConfig> {
    let file_value = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str::<Value>(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => Value::Object(Default::default()),
    };
    let mut top = file_value;
    for (path, v) in overrides {
        merge(&mut top, nest(path, v.clone()));
    }
    let alpha = match top.pointer("/env/alpha") {
        Some(v) => v.as_f64().context("env.alpha must be a number")?,
        None => EnvConfig::default().alpha,
    };
    let mut base = serde_json::to_value(RunConfig::for_alpha(alpha))?;
    merge(&mut base, top);
    let mut cfg: RunConfig = serde_json::from_value(base).context("invalid configuration")?;
    cfg.train.search = cfg.search.clone();
    cfg.validate()?;
    Ok(cfg)
}

/// `--out` when given, else `$TRANSIT_DESIGN_OUT/<command>`, else `runs/<command>`.
pub fn output_dir(explicit: Option<&Path>, command: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command),
    }
}
