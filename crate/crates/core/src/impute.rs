//! Stand-alone imputation used before clustering: column mean and KNN.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputationMethod {
    Mean,
    Knn,
}

impl ImputationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ImputationMethod::Mean => "mean",
            ImputationMethod::Knn => "knn",
        }
    }
}

impl fmt::Display for ImputationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImputationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ImputationMethod::Mean),
            "knn" => Ok(ImputationMethod::Knn),
            _ => Err(Error::Config(format!("unknown imputation method {s:?}"))),
        }
    }
}

fn default_k_neighbors() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig {
    pub method: ImputationMethod,
    /// Neighbors averaged per missing cell (KNN only).
    #[serde(default = "default_k_neighbors")]
    pub k_neighbors: usize,
    /// Measure KNN distances on z-scored coordinates. Filled values are
    /// always taken from the raw data.
    #[serde(default)]
    pub standardize: bool,
}

impl ImputationConfig {
    pub fn mean() -> Self {
        Self {
            method: ImputationMethod::Mean,
            k_neighbors: default_k_neighbors(),
            standardize: false,
        }
    }

    pub fn knn(k_neighbors: usize) -> Self {
        Self {
            method: ImputationMethod::Knn,
            k_neighbors,
            standardize: false,
        }
    }
}

/// A completed dataset plus the number of cells that fell back to the
/// column mean because no neighbor observed the coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputed {
    pub data: Dataset,
    pub fallback_cells: usize,
}

pub fn impute(ds: &Dataset, cfg: &ImputationConfig) -> Result<Imputed> {
    match cfg.method {
        ImputationMethod::Mean => Ok(Imputed {
            data: mean_impute(ds)?,
            fallback_cells: 0,
        }),
        ImputationMethod::Knn => knn_impute(ds, cfg),
    }
}

fn require_means(ds: &Dataset) -> Result<Vec<f64>> {
    ds.column_means()
        .into_iter()
        .enumerate()
        .map(|(j, m)| m.ok_or(Error::ImputationImpossible { column: j + 1 }))
        .collect()
}

/// Fills every masked cell with the mean of its column's observed cells.
pub fn mean_impute(ds: &Dataset) -> Result<Dataset> {
    let means = require_means(ds)?;
    let p = ds.p();
    let fill: Vec<f64> = (0..ds.n() * p).map(|cell| means[cell % p]).collect();
    ds.completed_with(ds.fill_missing(&fill)?)
}

/// KNN imputation with partial distances.
///
/// The distance between two rows is the Euclidean distance over coordinates
/// observed in both, scaled by `p / overlap`. A missing cell is the mean of
/// that coordinate over the `k_neighbors` nearest rows observing it, with
/// ties going to the lower row index.
pub fn knn_impute(ds: &Dataset, cfg: &ImputationConfig) -> Result<Imputed> {
    if cfg.k_neighbors == 0 {
        return Err(Error::Config("k_neighbors must be at least 1".into()));
    }
    if ds.is_complete() {
        return Ok(Imputed {
            data: ds.clone(),
            fallback_cells: 0,
        });
    }
    let (n, p) = (ds.n(), ds.p());
    let col_means = ds.column_means();
    let scales: Vec<(f64, f64)> = if cfg.standardize {
        (0..p)
            .map(|j| {
                let obs: Vec<f64> = (0..n).filter_map(|i| ds.get(i, j)).collect();
                let mean = col_means[j].unwrap_or(0.0);
                let var =
                    obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / obs.len().max(1) as f64;
                let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                (mean, sd)
            })
            .collect()
    } else {
        vec![(0.0, 1.0); p]
    };
    let scaled = |i: usize, j: usize| (ds.row(i)[j] - scales[j].0) / scales[j].1;

    let incomplete: Vec<usize> = (0..n)
        .filter(|&i| ds.mask_row(i).iter().any(|&m| !m))
        .collect();

    let filled_rows: Vec<(usize, Vec<(usize, f64)>, usize)> = incomplete
        .par_iter()
        .map(|&i| -> Result<_> {
            let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
            for r in (0..n).filter(|&r| r != i) {
                let mut sum = 0.0;
                let mut overlap = 0usize;
                for j in 0..p {
                    if ds.is_observed(i, j) && ds.is_observed(r, j) {
                        let d = scaled(i, j) - scaled(r, j);
                        sum += d * d;
                        overlap += 1;
                    }
                }
                if overlap > 0 {
                    dists.push((sum * p as f64 / overlap as f64, r));
                }
            }
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut cells = Vec::new();
            let mut fallbacks = 0;
            for j in (0..p).filter(|&j| !ds.is_observed(i, j)) {
                let neighbors: Vec<f64> = dists
                    .iter()
                    .filter_map(|&(_, r)| ds.get(r, j))
                    .take(cfg.k_neighbors)
                    .collect();
                let value = if neighbors.is_empty() {
                    fallbacks += 1;
                    col_means[j].ok_or(Error::ImputationImpossible { column: j + 1 })?
                } else {
                    neighbors.iter().sum::<f64>() / neighbors.len() as f64
                };
                cells.push((j, value));
            }
            Ok((i, cells, fallbacks))
        })
        .collect::<Result<_>>()?;

    let mut values = ds.values().to_vec();
    let mut fallback_cells = 0;
    for (i, cells, fb) in filled_rows {
        fallback_cells += fb;
        for (j, v) in cells {
            values[i * p + j] = v;
        }
    }
    if fallback_cells > 0 {
        log::warn!("knn imputation fell back to column means for {fallback_cells} cells");
    }
    Ok(Imputed {
        data: ds.completed_with(values)?,
        fallback_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(values: &[Option<f64>]) -> Dataset {
        let rows: Vec<Vec<Option<f64>>> = values.iter().map(|v| vec![Some(0.0), *v]).collect();
        Dataset::from_rows(&rows, None).unwrap()
    }

    #[test]
    fn mean_fills_column_mean() {
        let out = mean_impute(&col(&[Some(1.0), Some(2.0), None])).unwrap();
        assert_eq!(out.get(2, 1), Some(1.5));
        assert!(out.is_complete());

        let out = mean_impute(&col(&[Some(10.0), None, None, Some(30.0)])).unwrap();
        assert_eq!(out.get(1, 1), Some(20.0));
        assert_eq!(out.get(2, 1), Some(20.0));
    }

    #[test]
    fn fully_missing_column_names_the_column() {
        let ds = col(&[None, None]);
        assert!(matches!(
            mean_impute(&ds),
            Err(Error::ImputationImpossible { column: 2 })
        ));
    }

    #[test]
    fn complete_data_is_untouched() {
        let ds = Dataset::complete(2, 2, vec![1.0, 2.0, 3.0, 4.0], Some(vec![1, 2])).unwrap();
        assert_eq!(mean_impute(&ds).unwrap(), ds);
        assert_eq!(knn_impute(&ds, &ImputationConfig::knn(3)).unwrap().data, ds);
    }

    #[test]
    fn knn_picks_nearest_row() {
        let ds = Dataset::from_rows(
            &[
                vec![Some(0.0), Some(0.0)],
                vec![Some(10.0), Some(10.0)],
                vec![Some(0.1), None],
            ],
            None,
        )
        .unwrap();
        let out = knn_impute(&ds, &ImputationConfig::knn(1)).unwrap();
        assert_eq!(out.data.get(2, 1), Some(0.0));
        assert_eq!(out.fallback_cells, 0);
    }

    #[test]
    fn knn_clamps_to_available_candidates() {
        let ds = Dataset::from_rows(
            &[
                vec![Some(0.0), Some(1.0)],
                vec![Some(5.0), Some(3.0)],
                vec![Some(1.0), None],
                vec![Some(2.0), None],
            ],
            None,
        )
        .unwrap();
        let out = knn_impute(&ds, &ImputationConfig::knn(10)).unwrap();
        assert_eq!(out.data.get(2, 1), Some(2.0));
        assert_eq!(out.data.get(3, 1), Some(2.0));
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let ds = Dataset::from_rows(
            &[
                vec![Some(1.0), Some(7.0)],
                vec![Some(-1.0), Some(9.0)],
                vec![Some(0.0), None],
            ],
            None,
        )
        .unwrap();
        let out = knn_impute(&ds, &ImputationConfig::knn(1)).unwrap();
        assert_eq!(out.data.get(2, 1), Some(7.0));
    }

    #[test]
    fn knn_with_no_overlapping_candidate_falls_back() {
        // Row 2 observes only c1; the only row observing c2 shares no
        // coordinate with it, so no distance exists.
        let ds = Dataset::from_rows(&[vec![None, Some(4.0)], vec![Some(1.0), None]], None).unwrap();
        let out = knn_impute(&ds, &ImputationConfig::knn(2)).unwrap();
        assert_eq!(out.fallback_cells, 2);
        assert_eq!(out.data.get(1, 1), Some(4.0));
        assert_eq!(out.data.get(0, 0), Some(1.0));
    }

    #[test]
    fn equal_distances_give_column_mean() {
        let ds = Dataset::from_rows(
            &[
                vec![Some(1.0), Some(2.0)],
                vec![Some(-1.0), Some(6.0)],
                vec![Some(1.0), Some(7.0)],
                vec![Some(0.0), None],
            ],
            None,
        )
        .unwrap();
        let out = knn_impute(&ds, &ImputationConfig::knn(3)).unwrap();
        assert_eq!(out.data.get(3, 1), Some(5.0));
    }

    fn incomplete() -> impl Strategy<Value = Dataset> {
        (2usize..12, 1usize..4).prop_flat_map(|(n, p)| {
            (
                proptest::collection::vec(-10.0f64..10.0, n * p),
                proptest::collection::vec(any::<bool>(), n * p),
            )
                .prop_filter_map("needs observed cells", move |(v, mut m)| {
                    for i in 0..n {
                        m[i * p + i % p] = true;
                    }
                    for j in 0..p {
                        m[j] = true;
                    }
                    Dataset::new(n, p, v, m, None).ok()
                })
        })
    }

    proptest! {
        #[test]
        fn observed_cells_preserved(ds in incomplete(), k in 1usize..6, standardize in any::<bool>()) {
            let mean = mean_impute(&ds).unwrap();
            let mut cfg = ImputationConfig::knn(k);
            cfg.standardize = standardize;
            let knn = knn_impute(&ds, &cfg).unwrap().data;
            for out in [&mean, &knn] {
                prop_assert!(out.is_complete());
                for i in 0..ds.n() {
                    for j in 0..ds.p() {
                        if let Some(v) = ds.get(i, j) {
                            prop_assert_eq!(out.get(i, j), Some(v));
                        }
                    }
                }
                prop_assert_eq!(&knn_impute(out, &cfg).unwrap().data, out);
                prop_assert_eq!(&mean_impute(out).unwrap(), out);
            }
        }
    }
}
