use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Algorithm;
use crate::datagen::{MissingnessPlan, MixtureSpec};
use crate::error::{Error, Result};
use crate::impute::ImputationMethod;

/// Where replicate datasets come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    /// The bundled Iris data, identical in every replicate.
    Iris,
    /// A fresh calibrated mixture per replicate. The replicate's mixture is
    /// drawn from a seed derived from `(spec.seed, base_seed, replicate)`.
    Generated(MixtureSpec),
}

impl DatasetSource {
    /// Short name used in output files, e.g. `iris` or `omega-0.001`.
    pub fn label(&self) -> String {
        match self {
            DatasetSource::Iris => "iris".into(),
            DatasetSource::Generated(spec) => format!("omega-{}", spec.omega_check),
        }
    }
}

fn default_replicates() -> usize {
    100
}
fn default_restarts() -> usize {
    10
}
fn default_k_neighbors() -> usize {
    5
}

/// One sweep of engines and imputations over replicated incomplete data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub plans: Vec<MissingnessPlan>,
    pub imputations: Vec<ImputationMethod>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Engine runs per replicate and cell; ARI and NMI keep their maxima.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Neighbours used by KNN imputation.
    #[serde(default = "default_k_neighbors")]
    pub k_neighbors: usize,
    /// Standardize coordinates before KNN distances.
    #[serde(default)]
    pub standardize: bool,
    /// Also write one row per engine run.
    #[serde(default)]
    pub log_restarts: bool,
}

impl ExperimentConfig {
    pub fn new(
        dataset: DatasetSource,
        plans: Vec<MissingnessPlan>,
        imputations: Vec<ImputationMethod>,
        algorithms: Vec<Algorithm>,
    ) -> Self {
        Self {
            dataset,
            plans,
            imputations,
            algorithms,
            replicates: default_replicates(),
            restarts: default_restarts(),
            base_seed: 0,
            output_dir: None,
            k_neighbors: default_k_neighbors(),
            standardize: false,
            log_restarts: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if self.plans.is_empty() || self.algorithms.is_empty() || self.imputations.is_empty() {
            return Err(Error::Config(
                "plans, imputations and algorithms must be non-empty".into(),
            ));
        }
        let p = match &self.dataset {
            DatasetSource::Iris => 4,
            DatasetSource::Generated(spec) => {
                spec.validate()?;
                spec.p
            }
        };
        for plan in &self.plans {
            plan.validate(p)?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
