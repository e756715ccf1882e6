use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::matching::DEFAULT_RATIO;
use crate::metrics::{DEFAULT_ALPHA, DEFAULT_RECALL_THRESHOLD, DEFAULT_SGD_SAMPLES};
use crate::robust::{EstimatorConfig, EstimatorKind, DEFAULT_CONFIDENCE, DEFAULT_INLIER_THRESHOLD, DEFAULT_MAX_ITERATIONS};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FMBENCH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrunerChoice {
    #[default]
    None,
    /// Keeps ground-truth inliers only.
    Oracle,
}

/// A method evaluated by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Estimator(EstimatorKind),
    /// Returns the ground-truth matrix and ground-truth inliers.
    Oracle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Estimator(k) => k.name(),
            Method::Oracle => "Oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("oracle") {
            Ok(Method::Oracle)
        } else {
            s.parse().map(Method::Estimator)
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("fmbench-out")
}
fn default_ratio() -> f64 {
    DEFAULT_RATIO
}
fn default_estimators() -> Vec<String> {
    EstimatorKind::ALL.iter().map(|k| k.name().to_string()).collect()
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}
fn default_threshold() -> f64 {
    DEFAULT_INLIER_THRESHOLD
}
fn default_sgd_samples() -> usize {
    DEFAULT_SGD_SAMPLES
}
fn default_recall() -> f64 {
    DEFAULT_RECALL_THRESHOLD
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Benchmark configuration, read from a flat TOML file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dataset manifest. Relative paths are resolved against the config file.
    pub dataset: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub pruner: PrunerChoice,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_threshold")]
    pub inlier_threshold: f64,
    #[serde(default = "default_sgd_samples")]
    pub sgd_samples: usize,
    #[serde(default = "default_recall")]
    pub recall_threshold: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Worker threads; falls back to the environment variable, then to rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl PipelineConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            output: default_output(),
            seed: 0,
            ratio: DEFAULT_RATIO,
            pruner: PrunerChoice::None,
            estimators: default_estimators(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            confidence: DEFAULT_CONFIDENCE,
            inlier_threshold: DEFAULT_INLIER_THRESHOLD,
            sgd_samples: DEFAULT_SGD_SAMPLES,
            recall_threshold: DEFAULT_RECALL_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            threads: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        self.estimators.iter().map(|s| Method::parse(s)).collect()
    }

    pub fn estimator_config(&self, kind: EstimatorKind, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            kind,
            max_iterations: self.max_iterations,
            confidence: self.confidence,
            inlier_threshold: self.inlier_threshold,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::Config(format!("ratio {} outside (0, 1]", self.ratio)));
        }
        if self.sgd_samples == 0 {
            return Err(Error::Config("sgd_samples must be positive".into()));
        }
        if !(self.alpha > 0.0) || !(self.recall_threshold > 0.0) {
            return Err(Error::Config("alpha and recall_threshold must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        self.estimator_config(EstimatorKind::Ransac, 0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.methods().map(|_| ())
    }

    /// Thread count from the config, else from the environment.
    pub fn thread_count(&self) -> Result<Option<usize>> {
        if let Some(n) = self.threads {
            return Ok(Some(n));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV}='{v}' is not a positive integer"))),
            Err(_) => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg = PipelineConfig::from_toml("dataset = \"d.toml\"\n").unwrap();
        assert_eq!(cfg, PipelineConfig::new("d.toml"));
        assert_eq!(cfg.methods().unwrap().len(), 4);
        assert!(PipelineConfig::from_toml("dataset = \"d\"\nbogus = 1\n").is_err());
        let cfg = PipelineConfig::from_toml("dataset = \"d\"\nestimators = [\"oracle\", \"lmeds\"]\npruner = \"oracle\"\n").unwrap();
        assert_eq!(cfg.methods().unwrap(), vec![Method::Oracle, Method::Estimator(EstimatorKind::LMedS)]);
        assert_eq!(cfg.pruner, PrunerChoice::Oracle);
        let bad = PipelineConfig::from_toml("dataset = \"d\"\nestimators = [\"magsac\"]\n").unwrap();
        assert!(bad.validate().is_err());
    }
}
