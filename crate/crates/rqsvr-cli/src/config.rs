//! Resolved experiment configuration.
//!
//! Values resolve flag > config file > protocol default. The defaults are
//! the experiment protocol: 10k shots, 100 repetitions, 10 folds, a C grid
//! of 10^-3..10^2, epsilon 0.1 and a patience of 1000 trials.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

/// Prediction evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Shots,
}

/// The resolved configuration echoed into every run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub shots: u64,
    pub repetitions: usize,
    pub k: usize,
    pub grid: Vec<f64>,
    pub epsilon: f64,
    pub c: f64,
    pub patience: usize,
    pub restart_std: f64,
    pub max_trials: Option<usize>,
    pub ae_max: f64,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            shots: 10_000,
            repetitions: 100,
            k: 10,
            grid: rqsvr::svr::default_c_grid(),
            epsilon: 0.1,
            c: 1.0,
            patience: 1000,
            restart_std: 10.0,
            max_trials: None,
            ae_max: 5.44,
            mode: Mode::Shots,
        }
    }
}

/// Optional overrides loaded from `--config <file>`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub repetitions: Option<usize>,
    pub k: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub patience: Option<usize>,
    pub restart_std: Option<f64>,
    pub max_trials: Option<usize>,
    pub ae_max: Option<f64>,
    pub mode: Option<Mode>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let config: FileConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        Ok(config)
    }
}

/// Flag-level overrides shared across subcommands; `None` means the flag
/// was not given.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub repetitions: Option<usize>,
    pub k: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub patience: Option<usize>,
    pub restart_std: Option<f64>,
    pub max_trials: Option<usize>,
    pub ae_max: Option<f64>,
    pub mode: Option<Mode>,
}

pub fn resolve(file: Option<&FileConfig>, flags: Overrides) -> Result<ExperimentConfig> {
    let default_file = FileConfig::default();
    let file = file.unwrap_or(&default_file);
    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig {
        seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
        shots: flags.shots.or(file.shots).unwrap_or(defaults.shots),
        repetitions: flags.repetitions.or(file.repetitions).unwrap_or(defaults.repetitions),
        k: flags.k.or(file.k).unwrap_or(defaults.k),
        grid: flags.grid.or_else(|| file.grid.clone()).unwrap_or(defaults.grid),
        epsilon: flags.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
        c: flags.c.or(file.c).unwrap_or(defaults.c),
        patience: flags.patience.or(file.patience).unwrap_or(defaults.patience),
        restart_std: flags.restart_std.or(file.restart_std).unwrap_or(defaults.restart_std),
        max_trials: flags.max_trials.or(file.max_trials),
        ae_max: flags.ae_max.or(file.ae_max).unwrap_or(defaults.ae_max),
        mode: flags.mode.or(file.mode).unwrap_or(defaults.mode),
    };
    if config.shots == 0 {
        bail!("shots must be at least 1");
    }
    if config.repetitions == 0 {
        bail!("repetitions must be at least 1");
    }
    if !(config.epsilon >= 0.0) {
        bail!("epsilon must be nonnegative");
    }
    if !(config.c > 0.0) {
        bail!("C must be positive");
    }
    if config.grid.is_empty() || config.grid.iter().any(|&c| !(c > 0.0)) {
        bail!("C grid must be non-empty and positive");
    }
    if !(config.ae_max > 0.0) {
        bail!("stable threshold ae-max must be positive");
    }
    if !(config.restart_std > 0.0) {
        bail!("restart std must be positive");
    }
    Ok(config)
}
