//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, EnergyVariance, LsMode};
use crate::error::{Error, Result};
use crate::scenarios::ScenarioSpec;

pub const MIN_TRIALS: usize = 100;
pub const DEFAULT_THRESHOLD_LEVELS: usize = 512;

fn default_trials() -> usize {
    1000
}

fn default_c_r() -> Vec<f64> {
    vec![0.1]
}

fn default_t() -> Vec<usize> {
    vec![1]
}

fn default_fit_samples() -> usize {
    4000
}

fn default_true() -> bool {
    true
}

fn default_levels() -> usize {
    DEFAULT_THRESHOLD_LEVELS
}

fn default_alpha() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_epsilon_b() -> f64 {
    1e-3
}

fn default_bench_evals() -> usize {
    1000
}

fn default_bench_warmup() -> usize {
    50
}

/// One detector entry. Settings expand over `c_r × t`; uncompressed
/// detectors ignore `c_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub name: DetectorKind,
    #[serde(default = "default_c_r")]
    pub c_r: Vec<f64>,
    /// Frames per decision. Single-frame LLRs sum over frames.
    #[serde(default = "default_t")]
    pub t: Vec<usize>,
    /// Least-squares variant for `c:cov`.
    #[serde(default)]
    pub mode: LsMode,
    /// `c:cov`: estimate one shared off-diagonal value for all pairs.
    #[serde(default = "default_true")]
    pub tied: bool,
    /// Copula detectors: H1 rows used for the Kendall's-τ fit.
    #[serde(default = "default_fit_samples")]
    pub fit_samples: usize,
    /// Energy detectors: variance used by the analytic threshold.
    #[serde(default)]
    pub energy_variance: EnergyVariance,
}

impl DetectorConfig {
    pub fn new(name: DetectorKind) -> Self {
        Self {
            name,
            c_r: default_c_r(),
            t: default_t(),
            mode: LsMode::default(),
            tied: true,
            fit_samples: default_fit_samples(),
            energy_variance: EnergyVariance::default(),
        }
    }

    pub fn with_c_r(mut self, c_r: &[f64]) -> Self {
        self.c_r = c_r.to_vec();
        self
    }

    pub fn with_t(mut self, t: &[usize]) -> Self {
        self.t = t.to_vec();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub detectors: Vec<DetectorConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// False-alarm levels for `calibrate`.
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// One projection per `M` for the whole run instead of one per trial.
    #[serde(default)]
    pub fixed_projection: bool,
    #[serde(default = "default_levels")]
    pub threshold_levels: usize,
    /// Target error bound for the `bounds` comparison rule.
    #[serde(default = "default_epsilon_b")]
    pub epsilon_b: f64,
    #[serde(default = "default_bench_evals")]
    pub bench_evals: usize,
    #[serde(default = "default_bench_warmup")]
    pub bench_warmup: usize,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec, detectors: Vec<DetectorConfig>) -> Self {
        Self {
            scenario,
            detectors,
            trials: default_trials(),
            seed: 0,
            alpha: default_alpha(),
            output_dir: default_output_dir(),
            fixed_projection: false,
            threshold_levels: default_levels(),
            epsilon_b: default_epsilon_b(),
            bench_evals: default_bench_evals(),
            bench_warmup: default_bench_warmup(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks everything that can be checked before a trial runs.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials < MIN_TRIALS {
            return Err(Error::Config(format!("trials must be at least {MIN_TRIALS}, got {}", self.trials)));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("no detectors configured".into()));
        }
        if self.threshold_levels < 2 {
            return Err(Error::Config("threshold_levels must be at least 2".into()));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::Config(format!("alpha values must lie in (0, 1], got {a}")));
        }
        if !(self.epsilon_b > 0.0 && self.epsilon_b <= 0.5) {
            return Err(Error::Config(format!("epsilon_b must lie in (0, 0.5], got {}", self.epsilon_b)));
        }
        for d in &self.detectors {
            if d.t.is_empty() || d.c_r.is_empty() {
                return Err(Error::Config(format!("{}: c_r and t lists must be non-empty", d.name)));
            }
            if let Some(c) = d.c_r.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
                return Err(Error::Config(format!("{}: c_r must lie in (0, 1], got {c}", d.name)));
            }
            if d.name.is_compressed() {
                for &c in &d.c_r {
                    let m = compressed_dim(self.scenario.n, c);
                    if m == 0 {
                        return Err(Error::Config(format!("{}: c_r = {c} gives M = 0 at N = {}", d.name, self.scenario.n)));
                    }
                }
            }
            let min_t = d.name.min_frames();
            if let Some(t) = d.t.iter().find(|t| **t < min_t) {
                return Err(Error::Config(format!("{} needs T >= {min_t}, got T = {t}", d.name)));
            }
        }
        Ok(())
    }
}

/// `M = round(c_r·N)`, at most `N`.
pub fn compressed_dim(n: usize, c_r: f64) -> usize {
    ((c_r * n as f64).round() as usize).min(n)
}
