//! Engine configuration, read from a YAML file.
//!
//! Every field has a default, so a config file only lists what it changes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dimensions::IntegrityConstraints;
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, PumpStreamConfig};
use crate::mutation::MutationPlan;
use crate::predictor::{GbtParams, OracleCriterion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Readings per window.
    pub window_len: usize,
    pub seed: u64,
    pub constraints: ConstraintsConfig,
    /// Robust z-score cutoff of the anomaly detector.
    pub anomaly_cutoff: f64,
    /// Values kept in the timeliness reference sample.
    pub reference_sample_size: usize,
    pub drift: DriftConfig,
    pub gbt: GbtParams,
    pub dev_oracle: DevOracleConfig,
    #[serde(rename = "static")]
    pub static_mode: StaticConfig,
    pub adaptation: AdaptationConfig,
    pub mutation: MutationPlan,
    pub generator: PumpStreamConfig,
    pub experiment: ExperimentConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            window_len: 200,
            seed: 42,
            constraints: ConstraintsConfig::default(),
            anomaly_cutoff: crate::dimensions::DEFAULT_CUTOFF,
            reference_sample_size: 20_000,
            drift: DriftConfig::default(),
            gbt: GbtParams::default(),
            dev_oracle: DevOracleConfig::default(),
            static_mode: StaticConfig::default(),
            adaptation: AdaptationConfig::default(),
            mutation: MutationPlan::default(),
            generator: PumpStreamConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintsConfig {
    pub min_value: f64,
    pub max_value: f64,
}

impl Default for ConstraintsConfig {
    fn default() -> Self {
        Self {
            min_value: 0.0,
            max_value: 110.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    pub bins: usize,
    /// Reference range is the data range widened by this fraction per side.
    pub range_padding: f64,
    /// Pseudo-count per bin for drift divergences.
    pub smoothing: f64,
    /// Pseudo-count per bin for the skewness score.
    pub skew_smoothing: f64,
    pub tau: f64,
    pub min_history: usize,
    /// Legacy fixed divergence threshold; replaces the p-value rule when set.
    pub zeta: Option<f64>,
    /// Turns drift detection off (frozen-model ablation).
    pub enabled: bool,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            bins: 32,
            range_padding: 0.05,
            smoothing: 0.0,
            skew_smoothing: 1e-6,
            tau: 0.03,
            min_history: 30,
            zeta: None,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DevOracleConfig {
    pub criterion: OracleCriterion,
    pub holdout_fraction: f64,
    /// Fit attempts; the tree count doubles after each miss.
    pub max_iterations: usize,
}

impl Default for DevOracleConfig {
    fn default() -> Self {
        Self {
            criterion: OracleCriterion::R2 { min: 0.9 },
            holdout_fraction: 0.2,
            max_iterations: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaticConfig {
    /// Windows per evaluation chunk.
    pub beta: usize,
    pub criterion: OracleCriterion,
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            beta: 50,
            criterion: OracleCriterion::Mae { max: 0.5 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    /// Windows pooled into a reference density: the trailing development
    /// windows at first, the most recent stream windows (trigger included)
    /// on each adaptation.
    pub rebaseline_windows: usize,
    /// Mutants of the trigger window added to the training history on adaptation.
    pub augment_mutants: usize,
    /// Oldest history entries beyond this count are dropped. `None` keeps everything.
    pub history_cap: Option<usize>,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            rebaseline_windows: 10,
            augment_mutants: 0,
            history_cap: None,
        }
    }
}

impl EngineConfig {
    pub fn from_yaml(text: &str) -> Result<Self> {
        let cfg: Self = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_yaml(&text)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    pub fn constraints(&self) -> Result<IntegrityConstraints<f64>> {
        IntegrityConstraints::new(self.constraints.min_value, self.constraints.max_value)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window_len == 0 {
            return bad("window_len must be >= 1".into());
        }
        self.constraints()?;
        if !(self.anomaly_cutoff > 0.0) {
            return bad(format!("anomaly_cutoff must be > 0, got {}", self.anomaly_cutoff));
        }
        if self.reference_sample_size == 0 {
            return bad("reference_sample_size must be >= 1".into());
        }
        let d = &self.drift;
        if d.bins < 2 {
            return bad(format!("drift.bins must be >= 2, got {}", d.bins));
        }
        if !(d.tau > 0.0 && d.tau < 1.0) {
            return bad(format!("drift.tau must lie in (0, 1), got {}", d.tau));
        }
        if d.smoothing < 0.0 || d.skew_smoothing < 0.0 || d.range_padding < 0.0 {
            return bad("drift smoothing and padding must be >= 0".into());
        }
        self.gbt.validate()?;
        if !(self.dev_oracle.holdout_fraction > 0.0 && self.dev_oracle.holdout_fraction < 1.0) {
            return bad("dev_oracle.holdout_fraction must lie in (0, 1)".into());
        }
        if self.dev_oracle.max_iterations == 0 {
            return bad("dev_oracle.max_iterations must be >= 1".into());
        }
        if self.static_mode.beta == 0 {
            return bad("static.beta must be >= 1".into());
        }
        if self.adaptation.rebaseline_windows == 0 {
            return bad("adaptation.rebaseline_windows must be >= 1".into());
        }
        // Keep enough rows for the refit to fit a standardizer, PCA and trees.
        if let Some(cap) = self.adaptation.history_cap.filter(|c| *c < 4) {
            return bad(format!("adaptation.history_cap must be >= 4, got {cap}"));
        }
        self.mutation.validate()?;
        self.generator.validate()?;
        Ok(())
    }
}
