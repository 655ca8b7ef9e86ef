use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::cluster::fit_from;
use crate::data::{Algorithm, EngineConfig};
use crate::datagen::{generate_mixture, inject_missing, MissingnessPlan, MixtureSpec};
use crate::error::Result;
use crate::impute::{impute, ImputationConfig};
use crate::rng::derive_seed;

/// One point of the figure for one engine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigurePoint {
    pub row: usize,
    /// Coordinates after the engine's imputation.
    pub x1: f64,
    pub x2: f64,
    pub truth: usize,
    /// Cluster id, relabelled to agree with `truth` as far as possible.
    pub assignment: usize,
    pub missing: bool,
    pub misclassified: bool,
}

/// Per-engine point tables for the two-cluster illustration.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureBundle {
    pub masked_cells: usize,
    pub engines: Vec<(Algorithm, Vec<FigurePoint>)>,
}

#[derive(Serialize)]
struct CountRow {
    algorithm: Algorithm,
    misclassified: usize,
    masked_cells: usize,
}

impl FigureBundle {
    pub fn misclassified(&self, algorithm: Algorithm) -> Option<usize> {
        self.engines
            .iter()
            .find(|(a, _)| *a == algorithm)
            .map(|(_, pts)| pts.iter().filter(|p| p.misclassified).count())
    }

    /// Writes `fig1_<algorithm>.csv` per engine and `fig1_counts.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut counts = csv::Writer::from_path(dir.join("fig1_counts.csv"))?;
        for (alg, points) in &self.engines {
            let mut w = csv::Writer::from_path(dir.join(format!("fig1_{alg}.csv")))?;
            for p in points {
                w.serialize(p)?;
            }
            w.flush()?;
            counts.serialize(CountRow {
                algorithm: *alg,
                misclassified: self.misclassified(*alg).unwrap_or(0),
                masked_cells: self.masked_cells,
            })?;
        }
        counts.flush()?;
        Ok(())
    }
}

/// Relabels zero-based `pred` (K clusters) onto one-based truth classes with
/// the permutation that maximizes agreement. Brute force; K is small here.
fn match_labels(pred: &[usize], truth: &[usize], k: usize) -> Vec<usize> {
    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    let best = permutations(k)
        .into_iter()
        .max_by_key(|perm| {
            let hits = pred
                .iter()
                .zip(truth)
                .filter(|(&p, &t)| perm[p] + 1 == t)
                .count();
            // prefer the lexicographically smallest permutation on ties
            (hits, std::cmp::Reverse(perm.clone()))
        })
        .expect("at least one permutation");
    pred.iter().map(|&p| best[p] + 1).collect()
}

/// A two-dimensional, two-cluster mixture (overlap 0.1, 200 points) with
/// three masked cells, clustered by all three engines. Baselines start from
/// KNN imputation.
pub fn demo_figure1(seed: u64) -> Result<FigureBundle> {
    let spec = MixtureSpec::new(2, 2, 200, 0.1).with_seed(seed);
    let complete = generate_mixture(&spec)?.data;
    let plan = MissingnessPlan::new(vec![1], 1.5);
    let ds = inject_missing(&complete, &plan, derive_seed(seed, &[1]))?;
    let start = impute(&ds, &ImputationConfig::knn(5))?.data;
    let truth = complete.labels().expect("mixture data is labelled");
    let mut engines = Vec::new();
    for alg in Algorithm::ALL {
        let cfg = EngineConfig::new(alg, 2)
            .with_restarts(10)
            .with_seed(derive_seed(seed, &[2]));
        let fit = fit_from(&ds, &start, &cfg)?;
        let assigned = match_labels(fit.assignments.as_slice(), truth, 2);
        let points = (0..ds.n())
            .map(|i| {
                let row = fit.completed.row(i);
                FigurePoint {
                    row: i + 1,
                    x1: row[0],
                    x2: row[1],
                    truth: truth[i],
                    assignment: assigned[i],
                    missing: ds.mask_row(i).iter().any(|&m| !m),
                    misclassified: assigned[i] != truth[i],
                }
            })
            .collect();
        engines.push((alg, points));
    }
    Ok(FigureBundle {
        masked_cells: ds.missing_count(),
        engines,
    })
}
