//! Flat run configuration: defaults, then a TOML file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pdr_core::correction::DEFAULT_LAMBDA;
use pdr_core::eval::Baseline;
use pdr_core::regression::{KernelKind, DEFAULT_CLASSIFIER_C, DEFAULT_FOLDS};
use pdr_core::synth::suite::SuiteKind;
use pdr_core::SAMPLE_RATE_HZ;
use serde::{Deserialize, Serialize};

use crate::usage;

/// Every key any subcommand reads. Keys a subcommand does not use are ignored by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed. Unset means 0, or the manifest's own seed for `synth`.
    pub seed: Option<u64>,
    /// Bias regularization weight.
    pub lambda: f64,
    /// Rate sequences are resampled to on load, Hz.
    pub sample_rate: f64,
    /// Frames between training samples.
    pub stride: usize,
    pub out: Option<PathBuf>,

    pub manifest: Option<PathBuf>,
    pub suite: Option<SuiteKind>,
    pub per_placement: Option<usize>,
    /// Seconds per scripted walk.
    pub duration: Option<f64>,

    /// Directory of labeled sequence CSVs.
    pub data: Option<PathBuf>,
    pub kernel: KernelKind,
    /// Kernel scale; unset uses one over the feature dimension.
    pub gamma: Option<f64>,
    pub classifier_c: f64,
    /// Training samples kept per placement.
    pub pool: usize,
    pub grid_search: bool,
    pub folds: usize,

    pub model: Option<PathBuf>,
    /// Sequence CSV, or a directory of them for `eval`.
    pub input: Option<PathBuf>,
    pub online: bool,

    pub trajectory: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Methods compared against the ground truth besides the corrected pipeline.
    pub baselines: Vec<Baseline>,
    pub lambda_sweep: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            lambda: DEFAULT_LAMBDA,
            sample_rate: SAMPLE_RATE_HZ,
            stride: 10,
            out: None,
            manifest: None,
            suite: None,
            per_placement: None,
            duration: None,
            data: None,
            kernel: KernelKind::default(),
            gamma: None,
            classifier_c: DEFAULT_CLASSIFIER_C,
            pool: 600,
            grid_search: false,
            folds: DEFAULT_FOLDS,
            model: None,
            input: None,
            online: false,
            trajectory: None,
            ground_truth: None,
            baselines: Vec::new(),
            lambda_sweep: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Range checks shared by every subcommand.
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(usage(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(usage(format!("sample_rate must be positive, got {}", self.sample_rate)));
        }
        if self.stride == 0 {
            return Err(usage("stride must be at least 1"));
        }
        if self.folds < 2 {
            return Err(usage(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.pool == 0 {
            return Err(usage("pool must be at least 1"));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0 && d.is_finite()) {
                return Err(usage(format!("duration must be positive, got {d}")));
            }
        }
        if self.lambda_sweep.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(usage("lambda_sweep values must be finite and non-negative"));
        }
        Ok(())
    }

    /// Writes the resolved configuration to `path`.
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }
}

/// `path` with its extension replaced by `suffix`, e.g. `run.csv` -> `run.config.toml`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.lambda, 0.1);
        assert_eq!(c.sample_rate, 200.0);
        assert_eq!(c.stride, 10);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig {
            seed: Some(9),
            suite: Some(SuiteKind::Speed),
            baselines: Baseline::ALL.to_vec(),
            lambda_sweep: vec![1e-4, 0.1],
            out: Some("x/y".into()),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("lambda = 0.5\nlamda = 2.0\n").is_err());
        assert_eq!(RunConfig::parse("lambda = 0.5").unwrap().lambda, 0.5);
    }

    #[test]
    fn sidecar_replaces_extension() {
        assert_eq!(sidecar(Path::new("a/run.csv"), "config.toml"), PathBuf::from("a/run.config.toml"));
        assert_eq!(sidecar(Path::new("model"), "report.toml"), PathBuf::from("model.report.toml"));
    }
}
