use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SquareMatrix;

/// Hard cluster assignments, one zero-based cluster index per row.
///
/// Equivalent to an `n x K` indicator matrix with exactly one 1 per row. The
/// text form is one one-based index per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignments {
    k: usize,
    labels: Vec<usize>,
}

impl Assignments {
    pub fn new(k: usize, labels: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config(
                "assignments need at least one cluster".into(),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Shape(format!(
                "cluster index {bad} out of range for K = {k}"
            )));
        }
        Ok(Self { k, labels })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn cluster_of(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// One one-based cluster index per line.
    pub fn to_list(&self) -> String {
        let mut out = String::with_capacity(self.labels.len() * 3);
        for &l in &self.labels {
            out.push_str(&(l + 1).to_string());
            out.push('\n');
        }
        out
    }

    /// Parses [`to_list`](Self::to_list) output. Blank lines are ignored.
    pub fn from_list(text: &str, k: usize) -> Result<Self> {
        let labels = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| match l.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Parse(format!("bad cluster index {l:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, labels)
    }
}

/// Per-cluster centers, covariances and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub covariances: Vec<SquareMatrix>,
    pub counts: Vec<usize>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Lloyd's algorithm with squared Euclidean distance on completed data.
    Kmeans,
    /// Euclidean K-means that re-imputes missing cells with cluster centers.
    UnifiedKmeans,
    /// Mahalanobis K-means with conditional-mean imputation.
    Kmahal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Kmahal,
        Algorithm::UnifiedKmeans,
        Algorithm::Kmeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::UnifiedKmeans => "unified-kmeans",
            Algorithm::Kmahal => "kmahal",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Algorithm::Kmeans),
            "unified-kmeans" => Ok(Algorithm::UnifiedKmeans),
            "kmahal" => Ok(Algorithm::Kmahal),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// How initial centers are seeded for each restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    /// K distinct rows drawn uniformly without replacement.
    #[default]
    RandomRows,
    /// k-means++ seeding (squared-distance weighted draws).
    KmeansPlusPlus,
}

/// Which restart of the Mahalanobis engine is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartSelection {
    /// Smallest criterion A, i.e. largest classification likelihood.
    #[default]
    SmallestA,
    /// Largest criterion A.
    LargestA,
}

fn default_epsilon0() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    200
}
fn default_restarts() -> usize {
    1
}
fn default_cov_floor() -> f64 {
    1e-6
}

/// Settings shared by the three clustering engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub algorithm: Algorithm,
    #[serde(rename = "K")]
    pub k: usize,
    /// Relative objective change at which iteration stops.
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Eigenvalue floor for cluster covariances, relative to the mean
    /// per-coordinate variance of the data the engine starts from.
    #[serde(default = "default_cov_floor")]
    pub cov_floor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitMethod,
    #[serde(default)]
    pub restart_selection: RestartSelection,
}

impl EngineConfig {
    pub fn new(algorithm: Algorithm, k: usize) -> Self {
        Self {
            algorithm,
            k,
            epsilon0: default_epsilon0(),
            max_iter: default_max_iter(),
            restarts: default_restarts(),
            cov_floor: default_cov_floor(),
            seed: 0,
            init: InitMethod::default(),
            restart_selection: RestartSelection::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(self.epsilon0 > 0.0) {
            return Err(Error::Config("epsilon0 must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.cov_floor > 0.0) {
            return Err(Error::Config("cov_floor must be positive".into()));
        }
        Ok(())
    }
}
