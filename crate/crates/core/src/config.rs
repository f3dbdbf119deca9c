//! Run configuration: one JSON object drives a whole pipeline run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::appnp::TrainConfig;
use crate::cgi::{ChoiceMode, ChoiceModelConfig, DEFAULT_K_MC, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::graph::EndpointRule;
use crate::nn::L2Blocks;
use crate::synth::SyntheticConfig;

/// Locations of the four dataset files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

/// Choice-model hyperparameter grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.01, 0.1, 1.0, 10.0],
            folds: 5,
        }
    }
}

/// Cross-category edge injection applied before the pipeline runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionConfig {
    pub ratio: f64,
    pub node_fraction: f64,
    #[serde(default)]
    pub endpoint_rule: EndpointRule,
}

/// Which labeled nodes the choice model trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceCandidates {
    /// Validation split (training-split predictions are overfit).
    #[default]
    Validation,
    /// Train and validation splits together.
    TrainValidation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub l2_lambda: f64,
    pub l2_blocks: L2Blocks,
    pub alpha: f64,
    pub k_prop: usize,
    pub epochs: usize,
    pub patience: usize,
    pub tau: f64,
    pub k_mc: usize,
    pub svm: SvmConfig,
    /// Decision threshold of the choice rule.
    pub threshold: f64,
    pub choice_mode: ChoiceMode,
    pub choice_candidates: ChoiceCandidates,
    /// Dataset files; when absent, `synthetic` must be present.
    pub paths: Option<DataPaths>,
    pub synthetic: Option<SyntheticConfig>,
    pub injection: Option<InjectionConfig>,
    /// Include full probability rows in the prediction dump.
    pub dump_probabilities: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            hidden: 64,
            dropout: 0.5,
            lr: 0.01,
            l2_lambda: 5e-4,
            l2_blocks: L2Blocks::W1Only,
            alpha: 0.1,
            k_prop: 10,
            epochs: 1000,
            patience: 100,
            tau: DEFAULT_TAU,
            k_mc: DEFAULT_K_MC,
            svm: SvmConfig::default(),
            threshold: 0.0,
            choice_mode: ChoiceMode::default(),
            choice_candidates: ChoiceCandidates::default(),
            paths: None,
            synthetic: None,
            injection: None,
            dump_probabilities: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_none() && self.synthetic.is_none() {
            return Err(Error::Config(
                "config needs either 'paths' or 'synthetic'".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} not in [0, 1)", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if self.k_mc < 2 {
            return Err(Error::Config("k_mc must be at least 2".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            dropout: self.dropout,
            lr: self.lr,
            l2_lambda: self.l2_lambda,
            l2_blocks: self.l2_blocks,
            alpha: self.alpha,
            k_prop: self.k_prop,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn choice_config(&self) -> ChoiceModelConfig {
        ChoiceModelConfig {
            c_grid: self.svm.c_grid.clone(),
            gamma_grid: self.svm.gamma_grid.clone(),
            folds: self.svm.folds,
            seed: self.seed,
            tol: 1e-3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_deserialize_from_minimal_json() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 7, "synthetic": {"nodes": 100}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.hidden, 64);
        assert_eq!(cfg.k_mc, 50);
        assert_eq!(cfg.tau, 0.15);
        assert_eq!(cfg.svm.c_grid, vec![0.1, 1.0, 10.0, 100.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seed": 1, "bogus": true}"#);
        assert!(err.is_err());
    }

    #[test]
    fn validation_requires_a_data_source() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
    }
}
