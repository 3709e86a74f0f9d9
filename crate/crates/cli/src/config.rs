use std::path::Path;

use anyhow::{bail, Context, Result};
use camprior::priors::{FocalChannelMode, PriorConfig};
use log::LevelFilter;
use serde::Deserialize;

use crate::{FocalMode, GlobalArgs, LogLevel};

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    threads: Option<usize>,
    seed: Option<u64>,
    max_depth: Option<f64>,
    focal_channel_mode: Option<FocalMode>,
    log_level: Option<LogLevel>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub threads: usize,
    pub seed: u64,
    pub max_depth: f64,
    pub focal_channel_mode: FocalChannelMode,
    pub log_level: LevelFilter,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => load(path)?,
            None => ConfigFile::default(),
        };
        let max_depth = args.max_depth.or(file.max_depth).unwrap_or(camprior::ground::DEFAULT_MAX_DEPTH);
        if !(max_depth > 0.0 && max_depth.is_finite()) {
            bail!("max_depth must be positive, got {max_depth}");
        }
        let focal = match args.focal_channel_mode.or(file.focal_channel_mode).unwrap_or(FocalMode::Eq2) {
            FocalMode::Eq2 => FocalChannelMode::Eq2,
            FocalMode::Normalized500 => FocalChannelMode::Normalized500,
        };
        let log_level = match args.log_level.or(file.log_level).unwrap_or(LogLevel::Warn) {
            LogLevel::Off => LevelFilter::Off,
            LogLevel::Error => LevelFilter::Error,
            LogLevel::Warn => LevelFilter::Warn,
            LogLevel::Info => LevelFilter::Info,
            LogLevel::Debug => LevelFilter::Debug,
            LogLevel::Trace => LevelFilter::Trace,
        };
        Ok(Self {
            threads: args.threads.or(file.threads).unwrap_or(0),
            seed: args.seed.or(file.seed).unwrap_or(0),
            max_depth,
            focal_channel_mode: focal,
            log_level,
        })
    }

    pub fn prior_config(&self, unit_directions: bool) -> PriorConfig {
        PriorConfig { max_depth: self.max_depth, focal_channel_mode: self.focal_channel_mode, unit_directions }
    }
}

fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
