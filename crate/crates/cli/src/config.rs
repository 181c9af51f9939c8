use std::path::Path;

use anyhow::{Context, Result};
use latent_twd::PipelineConfig;
use serde::Deserialize;

use crate::PipelineArgs;

/// Settings that may come from a `--config` JSON file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub epsilon_factor: Option<f64>,
    pub max_scale: Option<usize>,
    pub seed: Option<u64>,
    pub landmark_tau: Option<f64>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("config: reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("config: parsing {}", path.display()))
    }
}

/// Flag, then config file, then `base`.
pub fn resolve(args: &PipelineArgs, file: &FileConfig, base: PipelineConfig) -> Result<PipelineConfig> {
    let cfg = PipelineConfig {
        epsilon_factor: args
            .epsilon_factor
            .or(file.epsilon_factor)
            .unwrap_or(base.epsilon_factor),
        max_scale: args.max_scale.or(file.max_scale).unwrap_or(base.max_scale),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
        landmark_tau: args.landmark_tau.or(file.landmark_tau).or(base.landmark_tau),
    };
    cfg.validate().context("config")?;
    Ok(cfg)
}

pub fn describe(cfg: &PipelineConfig) -> String {
    let tau = cfg.landmark_tau.map_or("none".to_string(), |t| t.to_string());
    format!(
        "epsilon_factor={} max_scale={} seed={} landmark_tau={tau}",
        cfg.epsilon_factor, cfg.max_scale, cfg.seed
    )
}
