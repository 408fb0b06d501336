//! Run configuration: one TOML document drives every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::countmodel::{AdjustLink, Arm, Covariates, ProportionMode};
use crate::simulator::SimConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every stage seed is derived from this one.
    pub seed: u64,
    pub simulate: SimConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Embed,
    Mpnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub predictor: PredictorKind,
    pub arm: String,
    pub proportion_mode: String,
    pub adjust_link: String,
    /// Replaces every laboratory proportion with this value.
    pub flat_proportion: Option<f64>,
    pub gamma: f64,
    pub covariates: String,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub message_steps: usize,
    pub readout_dim: usize,
    pub head_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            predictor: PredictorKind::Mpnn,
            arm: "full".into(),
            proportion_mode: "lab_fixed".into(),
            adjust_link: "sigmoid".into(),
            flat_proportion: None,
            gamma: 0.0,
            covariates: "log1p".into(),
            embed_dim: 32,
            hidden_dim: 32,
            message_steps: 3,
            readout_dim: 32,
            head_hidden: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub freeze_betas: bool,
    pub holdout_fraction: f64,
    /// Add NTC-only and unsequenced negatives, one of each per four observed tags.
    pub augment_negatives: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { epochs: 15, batch_size: 32, lr: 1e-3, freeze_betas: false, holdout_fraction: 0.2, augment_negatives: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    /// Defaults to `external.tsv` in the data directory.
    pub external: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { k: 10, external: None }
    }
}

/// Validated model settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelChoice {
    pub arm: Arm,
    pub mode: ProportionMode,
    pub flat: Option<f64>,
    pub covariates: Covariates,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        if table.get("simulate").and_then(|s| s.get("seed")).is_some() {
            return Err(config_err("simulate.seed", "not allowed; set the top-level `seed`"));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        let mut echo = self.clone();
        echo.simulate.seed = 0;
        let mut table = toml::Table::try_from(&echo).expect("config serializes");
        if let Some(toml::Value::Table(s)) = table.get_mut("simulate") {
            s.remove("seed");
        }
        toml::to_string(&table).expect("config serializes")
    }

    /// The simulation settings with the derived simulation seed.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig { seed: crate::simulator::derive_seed(self.seed, "simulate"), ..self.simulate.clone() }
    }

    pub fn model_choice(&self) -> Result<ModelChoice, CliError> {
        let m = &self.model;
        let arm: Arm = m.arm.parse().map_err(|e| config_err("model.arm", e))?;
        let link: AdjustLink = m.adjust_link.parse().map_err(|e| config_err("model.adjust_link", e))?;
        let mut mode: ProportionMode = m.proportion_mode.parse().map_err(|e| config_err("model.proportion_mode", e))?;
        if let ProportionMode::LabPlusLearnedAdjust(_) = mode {
            mode = ProportionMode::LabPlusLearnedAdjust(link);
        }
        let covariates: Covariates = m.covariates.parse().map_err(|e| config_err("model.covariates", e))?;
        if let Some(p) = m.flat_proportion {
            if !(0.0..=1.0).contains(&p) {
                return Err(config_err("model.flat_proportion", format!("must be in [0, 1] (got {p})")));
            }
        }
        Ok(ModelChoice { arm, mode, flat: m.flat_proportion, covariates })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sim_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.model_choice()?;
        let m = &self.model;
        if !(m.gamma >= 0.0 && m.gamma.is_finite()) {
            return Err(config_err("model.gamma", format!("must be non-negative (got {})", m.gamma)));
        }
        for (key, v) in [
            ("model.embed_dim", m.embed_dim),
            ("model.hidden_dim", m.hidden_dim),
            ("model.message_steps", m.message_steps),
            ("model.readout_dim", m.readout_dim),
            ("model.head_hidden", m.head_hidden),
            ("train.epochs", self.train.epochs),
            ("train.batch_size", self.train.batch_size),
            ("eval.k", self.eval.k),
        ] {
            if v == 0 {
                return Err(config_err(key, "must be positive"));
            }
        }
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(config_err("train.lr", format!("must be positive (got {})", t.lr)));
        }
        if !(t.holdout_fraction > 0.0 && t.holdout_fraction < 1.0) {
            return Err(config_err("train.holdout_fraction", format!("must lie in (0, 1) (got {})", t.holdout_fraction)));
        }
        Ok(())
    }
}
