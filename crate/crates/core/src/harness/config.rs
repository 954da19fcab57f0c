//! Experiment configuration, stored as TOML.
//!
//! Every default of an experiment lives here: model and training
//! hyper-parameters, the DP-FLames defense (via [`DpConfig`]'s defaults) and
//! the attack schedule.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::AttackKind;
use crate::dp::DpConfig;
use crate::error::{Error, Result};
use crate::fed::TrainParams;
use crate::kge::{LossParams, ModelKind};
use crate::optim::OptimizerKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Class-structured generator; also yields the attacker's aux schema.
    Synthetic {
        entities: usize,
        relations: usize,
        triples: usize,
    },
    /// Tab-separated `head relation tail` file, optionally with fixed
    /// vocabularies and an aux schema (JSON) for server-side inference.
    Files {
        triples: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entities: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relations: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aux: Option<PathBuf>,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            entities: 300,
            relations: 12,
            triples: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// attacks whose observables are recorded during training
    pub kinds: Vec<AttackKind>,
    /// observe every `interval` rounds
    pub interval: usize,
    pub victim: usize,
    pub adversary: usize,
    pub members: usize,
    pub nonmembers: usize,
    /// rounds between tail reversal and measurement
    pub cia_lag: usize,
    /// ordered entity pairs clustered per round (0 = all)
    pub si_cap: usize,
    pub si_quantile: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            kinds: Vec::new(),
            interval: 5,
            victim: 0,
            adversary: 1,
            members: 100,
            nonmembers: 100,
            cia_lag: 1,
            si_cap: 5000,
            si_quantile: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// run directory name under the output root
    pub name: String,
    pub seed: u64,
    pub model: ModelKind,
    pub dim: usize,
    pub clients: usize,
    pub overlap_frac: f64,
    pub rounds: usize,
    pub local_iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub n_neg: usize,
    pub adv_temp: f64,
    pub gamma: f64,
    pub validation_interval: usize,
    pub checkpoint_interval: usize,
    /// train / valid / test fractions of each client's triples
    pub split: [f64; 3],
    /// share of all triples moved into the public pool before partitioning
    pub public_frac: f64,
    pub dataset: DatasetConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defense: Option<DpConfig>,
    pub attacks: AttackConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "run".into(),
            seed: 0,
            model: ModelKind::TransE,
            dim: 128,
            clients: 3,
            overlap_frac: 0.3,
            rounds: 50,
            local_iters: 20,
            batch: 64,
            lr: 0.001,
            optimizer: OptimizerKind::Adam,
            n_neg: 256,
            adv_temp: 1.0,
            gamma: 10.0,
            validation_interval: 5,
            checkpoint_interval: 5,
            split: [0.8, 0.1, 0.1],
            public_frac: 0.1,
            dataset: DatasetConfig::default(),
            defense: None,
            attacks: AttackConfig::default(),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(cfg_err(format!("run name {:?} is not a plain directory name", self.name)));
        }
        let counts = [
            ("dim", self.dim),
            ("clients", self.clients),
            ("rounds", self.rounds),
            ("batch", self.batch),
            ("n_neg", self.n_neg),
            ("validation_interval", self.validation_interval),
            ("checkpoint_interval", self.checkpoint_interval),
            ("attacks.interval", self.attacks.interval),
            ("attacks.cia_lag", self.attacks.cia_lag),
        ];
        for (n, v) in counts {
            if v == 0 {
                return Err(cfg_err(format!("{n} must be >= 1")));
            }
        }
        if self.clients < 2 {
            return Err(cfg_err("a federation needs at least 2 clients"));
        }
        if !(0.0..=1.0).contains(&self.overlap_frac) {
            return Err(cfg_err(format!("overlap_frac {} outside [0, 1]", self.overlap_frac)));
        }
        if !(0.0..1.0).contains(&self.public_frac) {
            return Err(cfg_err(format!("public_frac {} outside [0, 1)", self.public_frac)));
        }
        if self.split.iter().any(|x| !(0.0..=1.0).contains(x)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(cfg_err(format!("split {:?} must be fractions summing to 1", self.split)));
        }
        if !(self.lr > 0.0) {
            return Err(cfg_err(format!("lr must be positive, got {}", self.lr)));
        }
        self.loss().validate().map_err(|e| cfg_err(e.to_string()))?;
        if let Some(d) = &self.defense {
            d.validate()?;
            if self.public_frac == 0.0 {
                return Err(cfg_err("the defense samples negatives from public pairs; set public_frac > 0"));
            }
        }
        let a = &self.attacks;
        if a.victim >= self.clients || a.adversary >= self.clients || a.victim == a.adversary {
            return Err(cfg_err(format!(
                "victim {} and adversary {} must be distinct clients below {}",
                a.victim, a.adversary, self.clients
            )));
        }
        if !(0.0..=1.0).contains(&a.si_quantile) {
            return Err(cfg_err("attacks.si_quantile outside [0, 1]"));
        }
        if let DatasetConfig::Synthetic { entities, relations, triples } = self.dataset {
            if entities == 0 || relations == 0 || triples == 0 {
                return Err(cfg_err("synthetic dataset sizes must be positive"));
            }
        }
        Ok(())
    }

    pub fn loss(&self) -> LossParams {
        LossParams {
            gamma: self.gamma,
            n_neg: self.n_neg,
            adv_temp: self.adv_temp,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            model: self.model,
            dim: self.dim,
            loss: self.loss(),
            batch: self.batch,
            lr: self.lr,
            optimizer: self.optimizer,
            rounds: self.rounds,
            local_iters: self.local_iters,
            validation_interval: self.validation_interval,
            seed: self.seed,
        }
    }

    /// Rounds at which attack observables are recorded.
    pub fn attack_rounds(&self) -> std::collections::BTreeSet<usize> {
        (1..=self.rounds).filter(|r| r % self.attacks.interval == 0).collect()
    }
}
