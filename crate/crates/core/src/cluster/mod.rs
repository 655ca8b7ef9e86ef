//! The three clustering engines and the primitives they share.
//!
//! All engines minimize a K-means style objective
//!
//! ```text
//! obj = sum_i d(x_i, mu_{z_i})
//! ```
//!
//! by alternating updates of the hard assignments `z`, the cluster
//! parameters and, for incomplete data, the missing cells:
//!
//! * [`Algorithm::Kmeans`]: Lloyd's algorithm with squared Euclidean `d` on
//!   data completed beforehand.
//! * [`Algorithm::UnifiedKmeans`]: as above, but every cycle also rewrites
//!   each missing cell with the matching coordinate of its cluster center.
//! * [`Algorithm::Kmahal`]: squared Mahalanobis `d` with per-cluster
//!   covariances, and missing cells rewritten with their Gaussian
//!   conditional mean given the row's observed cells. Each term also
//!   carries the log-determinant of its cluster covariance, so the
//!   objective is `sum_i d_M^2(x_i) + A`, the negative classification
//!   log-likelihood up to constants.

mod engine;
mod init;

use serde::Serialize;

pub use engine::{fit_single, CovarianceMode, Initialization};

use crate::data::{Algorithm, Assignments, ClusterModel, Dataset, EngineConfig, RowSplit};
use crate::error::{Error, Result};
use crate::impute::mean_impute;
use crate::numerics::{Cholesky, SquareMatrix};

/// Output of one engine fit (the selected restart).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub algorithm: Algorithm,
    pub model: ClusterModel,
    pub assignments: Assignments,
    /// Input data with every missing cell holding its final value.
    pub completed: Dataset,
    /// Objective after each full cycle.
    pub objective_trace: Vec<f64>,
    pub criterion_a: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart this result came from.
    pub restart: usize,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Serialize)]
struct FitDocument<'a> {
    algorithm: Algorithm,
    #[serde(rename = "K")]
    k: usize,
    restart: usize,
    iterations: usize,
    converged: bool,
    criterion_a: f64,
    objective_trace: &'a [f64],
    /// One-based cluster index per row.
    assignments: Vec<usize>,
    counts: &'a [usize],
    centers: &'a [Vec<f64>],
    /// Row-major covariance entries per cluster.
    covariances: Vec<&'a [f64]>,
    completed_data: String,
}

impl FitResult {
    /// JSON document with assignments, model, trace and the completed data
    /// (as an embedded CSV string).
    pub fn to_document(&self) -> String {
        let doc = FitDocument {
            algorithm: self.algorithm,
            k: self.model.k(),
            restart: self.restart,
            iterations: self.iterations,
            converged: self.converged,
            criterion_a: self.criterion_a,
            objective_trace: &self.objective_trace,
            assignments: self.assignments.as_slice().iter().map(|l| l + 1).collect(),
            counts: &self.model.counts,
            centers: &self.model.centers,
            covariances: self
                .model
                .covariances
                .iter()
                .map(SquareMatrix::as_slice)
                .collect(),
            completed_data: self.completed.to_csv_string(),
        };
        serde_json::to_string_pretty(&doc).expect("fit document serializes")
    }
}

/// Squared Mahalanobis distance `(x - mu)^T cov^{-1} (x - mu)`.
pub fn mahalanobis_sq(x: &[f64], center: &[f64], cov: &SquareMatrix) -> Result<f64> {
    if x.len() != center.len() || x.len() != cov.dim() {
        return Err(Error::Shape(format!(
            "point of length {}, center of length {}, covariance of dimension {}",
            x.len(),
            center.len(),
            cov.dim()
        )));
    }
    let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    Ok(Cholesky::new(cov)?.quadratic_form(&diff))
}

/// Gaussian conditional mean of the missing coordinates of `row` given its
/// observed ones: `mu(m) + cov(m,o) cov(o,o)^{-1} (x(o) - mu(o))`.
pub fn conditional_mean(row: &RowSplit, center: &[f64], cov: &SquareMatrix) -> Result<Vec<f64>> {
    let p = cov.dim();
    if center.len() != p || row.observed.len() + row.missing.len() != p {
        return Err(Error::Shape(format!(
            "row split over {} coordinates, center of length {}, covariance of dimension {p}",
            row.observed.len() + row.missing.len(),
            center.len()
        )));
    }
    if row.missing.is_empty() {
        return Ok(Vec::new());
    }
    if row.observed.is_empty() {
        return Err(Error::InvalidDataset(
            "conditional mean needs at least one observed coordinate".into(),
        ));
    }
    let s_oo = cov.submatrix(&row.observed, &row.observed);
    let chol = Cholesky::from_row_major(row.observed.len(), &s_oo)?;
    let resid: Vec<f64> = row
        .observed
        .iter()
        .zip(&row.values)
        .map(|(&j, &v)| v - center[j])
        .collect();
    let w = chol.solve(&resid);
    Ok(row
        .missing
        .iter()
        .map(|&m| {
            let shift: f64 = row
                .observed
                .iter()
                .zip(&w)
                .map(|(&o, wi)| cov.get(m, o) * wi)
                .sum();
            center[m] + shift
        })
        .collect())
}

/// `A = sum_k n_k * sum_i log(lambda_{k,i})`, the eigenvalue form of the
/// negative classification log-likelihood (up to constants). Computed as
/// `sum_k n_k log det(cov_k)`; empty clusters contribute nothing.
pub fn criterion_a(model: &ClusterModel) -> Result<f64> {
    model
        .counts
        .iter()
        .zip(&model.covariances)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, cov)| Ok(n as f64 * crate::numerics::log_det(cov)?))
        .sum()
}

/// Runs the configured engine, starting incomplete data from a column-mean
/// fill.
pub fn fit(ds: &Dataset, cfg: &EngineConfig) -> Result<FitResult> {
    let start = if ds.is_complete() {
        ds.clone()
    } else {
        mean_impute(ds)?
    };
    fit_from(ds, &start, cfg)
}

/// Runs the configured engine on `ds`, using the completed dataset `start`
/// for the initial values of the missing cells.
///
/// Every restart derives its own random stream from `(cfg.seed, restart)`.
/// K-means variants keep the restart with the lowest objective; the
/// Mahalanobis engine keeps the one selected by `cfg.restart_selection`.
pub fn fit_from(ds: &Dataset, start: &Dataset, cfg: &EngineConfig) -> Result<FitResult> {
    use rayon::prelude::*;

    cfg.validate()?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            fit_single(
                ds,
                start,
                cfg,
                &Initialization::Seeded { restart: r },
                CovarianceMode::Estimated,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let key = |f: &FitResult| match (cfg.algorithm, cfg.restart_selection) {
        (Algorithm::Kmahal, crate::data::RestartSelection::SmallestA) => f.criterion_a,
        (Algorithm::Kmahal, crate::data::RestartSelection::LargestA) => -f.criterion_a,
        _ => f.objective(),
    };
    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if key(run) < key(&runs[best]) {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

/// Lloyd's algorithm on a fully observed dataset.
pub fn fit_kmeans(ds: &Dataset, cfg: &EngineConfig) -> Result<FitResult> {
    if !ds.is_complete() {
        return Err(Error::InvalidDataset(
            "K-means needs a fully observed dataset; impute first".into(),
        ));
    }
    fit_from(
        ds,
        ds,
        &EngineConfig {
            algorithm: Algorithm::Kmeans,
            ..cfg.clone()
        },
    )
}

/// Unified Euclidean K-means, missing cells starting from column means.
pub fn fit_unified_kmeans(ds: &Dataset, cfg: &EngineConfig) -> Result<FitResult> {
    fit(
        ds,
        &EngineConfig {
            algorithm: Algorithm::UnifiedKmeans,
            ..cfg.clone()
        },
    )
}

/// Mahalanobis K-means with conditional-mean imputation, missing cells
/// starting from column means.
pub fn fit_kmahal(ds: &Dataset, cfg: &EngineConfig) -> Result<FitResult> {
    fit(
        ds,
        &EngineConfig {
            algorithm: Algorithm::Kmahal,
            ..cfg.clone()
        },
    )
}
