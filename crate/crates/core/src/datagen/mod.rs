//! Synthetic data, missingness injection and the bundled Iris data.

mod iris;
mod missing;
mod mixture;
mod overlap;

use serde::{Deserialize, Serialize};

pub use iris::{load_iris, load_iris_from, IRIS_SHA256};
pub use missing::{inject_missing, MissingnessPlan};
pub use mixture::{generate_mixture, Mixture, MixtureMetadata, MixtureSpec};
pub use overlap::{estimate_pairwise_overlap, max_pairwise_overlap, Component, MaxOverlap};

/// Sidecar document written next to generated or masked dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub n: usize,
    pub p: usize,
    /// Seed of the step that produced the file.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missingness: Option<MissingnessPlan>,
    /// Masked cells per coordinate.
    pub missing_per_column: Vec<usize>,
}
