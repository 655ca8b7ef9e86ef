//! K-means clustering for incomplete data.
//!
//! The crate provides three clustering engines for datasets with missing
//! cells, the pre-clustering imputations they are compared with, cluster
//! validity metrics, a synthetic Gaussian-mixture generator with controlled
//! cluster overlap, and an experiment harness that sweeps engines over
//! replicated incomplete datasets.
//!
//! ```
//! use kmahal::cluster::fit;
//! use kmahal::data::{Algorithm, EngineConfig};
//! use kmahal::datagen::load_iris;
//! use kmahal::metrics::adjusted_rand_index;
//!
//! let iris = load_iris().unwrap();
//! let cfg = EngineConfig::new(Algorithm::Kmahal, 3).with_restarts(5).with_seed(1);
//! let result = fit(&iris, &cfg).unwrap();
//! let ari = adjusted_rand_index(result.assignments.as_slice(), iris.labels().unwrap()).unwrap();
//! assert!(ari > 0.5);
//! ```

pub mod cluster;
pub mod data;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod impute;
pub mod metrics;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
