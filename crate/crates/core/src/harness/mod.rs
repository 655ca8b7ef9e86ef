//! Replicated experiments: incomplete datasets, imputation and engine sweeps,
//! per-replicate maxima and median/IQR summaries.
//!
//! For every replicate `r` the harness derives a seed from
//! `(base_seed, r)`, builds the dataset, and for each missingness plan masks
//! it once. Each (imputation, algorithm) cell then runs the engine
//! `restarts` times from independent initializations and records the
//! largest ARI and the largest NMI over those runs, each maximized on its
//! own. Runs share seeds across cells, so every algorithm sees the same
//! initial rows.
//!
//! Records are collected by replicate index, so output files do not depend
//! on the number of worker threads.

mod config;
mod figure;
mod summary;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DatasetSource, ExperimentConfig};
pub use figure::{demo_figure1, FigureBundle, FigurePoint};
pub use summary::{iqr, median, pivot, quantile, summarize, Metric, Pivot, SummaryRow};

use crate::cluster::fit_from;
use crate::data::{Algorithm, Dataset, EngineConfig};
use crate::datagen::{generate_mixture, inject_missing, load_iris, MissingnessPlan};
use crate::error::{Error, Result};
use crate::impute::{impute, ImputationConfig, ImputationMethod};
use crate::metrics::{adjusted_rand_index, normalized_mutual_information};
use crate::rng::derive_seed;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "KMAHAL_THREADS";

const MASK_TAG: u64 = 1;
const ENGINE_TAG: u64 = 2;

/// Result of one (replicate, plan, imputation, algorithm) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// One-based replicate index.
    pub replicate: usize,
    pub dataset: String,
    pub plan: String,
    pub coords: String,
    pub d_percent: f64,
    pub imputation: String,
    pub algorithm: String,
    /// Largest ARI over the cell's runs.
    pub ari: Option<f64>,
    /// Largest NMI over the cell's runs.
    pub nmi: Option<f64>,
    /// Criterion A of the run with the largest ARI.
    pub criterion_a: Option<f64>,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One engine run inside a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub replicate: usize,
    pub dataset: String,
    pub plan: String,
    pub imputation: String,
    pub algorithm: String,
    /// One-based run index within the cell.
    pub run: usize,
    pub ari: f64,
    pub nmi: f64,
    pub criterion_a: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    /// Filled only when `log_restarts` is set.
    pub restarts: Vec<RestartRecord>,
}

/// Worker count from `KMAHAL_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Runs `f` on a pool of `threads` workers (machine parallelism if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

struct Cell<'a> {
    replicate: usize,
    dataset: &'a str,
    plan: &'a MissingnessPlan,
}

impl Cell<'_> {
    fn record(&self, imputation: ImputationMethod, algorithm: Algorithm) -> RunRecord {
        RunRecord {
            replicate: self.replicate,
            dataset: self.dataset.to_string(),
            plan: self.plan.descriptor(),
            coords: coords_label(self.plan),
            d_percent: self.plan.d_percent,
            imputation: imputation.as_str().to_string(),
            algorithm: algorithm.as_str().to_string(),
            ari: None,
            nmi: None,
            criterion_a: None,
            status: "ok".into(),
        }
    }
}

fn coords_label(plan: &MissingnessPlan) -> String {
    let c: Vec<String> = plan.coords.iter().map(|c| format!("c{c}")).collect();
    c.join("+")
}

fn failed(mut rec: RunRecord, err: &Error) -> RunRecord {
    rec.status = format!("failed: {err}");
    rec
}

fn class_count(labels: &[usize]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Runs every (imputation, algorithm) cell of one replicate and plan.
fn run_plan(
    cfg: &ExperimentConfig,
    cell: &Cell,
    complete: &Dataset,
    replicate_seed: u64,
    plan_index: usize,
    restarts: &mut Vec<RestartRecord>,
) -> Vec<RunRecord> {
    let mut out = Vec::new();
    let every = |f: &dyn Fn(ImputationMethod, Algorithm) -> RunRecord| -> Vec<RunRecord> {
        cfg.imputations
            .iter()
            .flat_map(|&m| cfg.algorithms.iter().map(move |&a| (m, a)))
            .map(|(m, a)| f(m, a))
            .collect()
    };
    let mask_seed = derive_seed(replicate_seed, &[MASK_TAG, plan_index as u64]);
    let incomplete = match inject_missing(complete, cell.plan, mask_seed) {
        Ok(ds) => ds,
        Err(e) => return every(&|m, a| failed(cell.record(m, a), &e)),
    };
    let truth = complete.labels().expect("harness datasets are labelled");
    let k = class_count(truth);
    for &method in &cfg.imputations {
        let icfg = ImputationConfig {
            method,
            k_neighbors: cfg.k_neighbors,
            standardize: cfg.standardize,
        };
        let start = match impute(&incomplete, &icfg) {
            Ok(imp) => {
                if imp.fallback_cells > 0 {
                    log::warn!(
                        "replicate {} {}: {} cells fell back to column means",
                        cell.replicate,
                        cell.plan.descriptor(),
                        imp.fallback_cells
                    );
                }
                imp.data
            }
            Err(e) => {
                for &a in &cfg.algorithms {
                    out.push(failed(cell.record(method, a), &e));
                }
                continue;
            }
        };
        for &algorithm in &cfg.algorithms {
            let mut rec = cell.record(method, algorithm);
            let mut best_ari = f64::NEG_INFINITY;
            let mut best_nmi = f64::NEG_INFINITY;
            let mut a_at_best = f64::NAN;
            let mut log = Vec::new();
            let result: Result<()> = (0..cfg.restarts).try_for_each(|t| {
                let seed = derive_seed(replicate_seed, &[ENGINE_TAG, plan_index as u64, t as u64]);
                let ecfg = EngineConfig::new(algorithm, k).with_seed(seed);
                let fit = fit_from(&incomplete, &start, &ecfg)?;
                let ari = adjusted_rand_index(fit.assignments.as_slice(), truth)?;
                let nmi = normalized_mutual_information(fit.assignments.as_slice(), truth)?;
                if ari > best_ari {
                    best_ari = ari;
                    a_at_best = fit.criterion_a;
                }
                best_nmi = best_nmi.max(nmi);
                if cfg.log_restarts {
                    log.push(RestartRecord {
                        replicate: cell.replicate,
                        dataset: cell.dataset.to_string(),
                        plan: cell.plan.descriptor(),
                        imputation: method.as_str().to_string(),
                        algorithm: algorithm.as_str().to_string(),
                        run: t + 1,
                        ari,
                        nmi,
                        criterion_a: fit.criterion_a,
                        objective: fit.objective(),
                        iterations: fit.iterations,
                        converged: fit.converged,
                    });
                }
                Ok(())
            });
            match result {
                Ok(()) => {
                    rec.ari = Some(best_ari);
                    rec.nmi = Some(best_nmi);
                    rec.criterion_a = Some(a_at_best);
                    restarts.extend(log);
                }
                Err(e) => rec = failed(rec, &e),
            }
            out.push(rec);
        }
    }
    out
}

/// Runs the experiment on the current worker pool and, when
/// `cfg.output_dir` is set, writes its files there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let label = cfg.dataset.label();
    let iris = match cfg.dataset {
        DatasetSource::Iris => Some(load_iris()?),
        DatasetSource::Generated(_) => None,
    };
    let per_replicate: Vec<(Vec<RunRecord>, Vec<RestartRecord>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let replicate_seed = derive_seed(cfg.base_seed, &[r as u64]);
            let data = match (&cfg.dataset, &iris) {
                (_, Some(ds)) => Ok(ds.clone()),
                (DatasetSource::Generated(spec), None) => {
                    let mut spec = spec.clone();
                    spec.seed = derive_seed(spec.seed, &[cfg.base_seed, r as u64]);
                    generate_mixture(&spec).map(|m| m.data)
                }
                (DatasetSource::Iris, None) => unreachable!("Iris is loaded up front"),
            };
            let mut records = Vec::new();
            let mut restarts = Vec::new();
            for (pi, plan) in cfg.plans.iter().enumerate() {
                let cell = Cell {
                    replicate: r + 1,
                    dataset: &label,
                    plan,
                };
                match &data {
                    Ok(ds) => {
                        records.extend(run_plan(cfg, &cell, ds, replicate_seed, pi, &mut restarts))
                    }
                    Err(e) => {
                        for &m in &cfg.imputations {
                            for &a in &cfg.algorithms {
                                records.push(failed(cell.record(m, a), e));
                            }
                        }
                    }
                }
            }
            (records, restarts)
        })
        .collect();
    let mut records = Vec::new();
    let mut restarts = Vec::new();
    for (rec, rst) in per_replicate {
        records.extend(rec);
        restarts.extend(rst);
    }
    // summary groups follow plan, imputation and algorithm order
    let mut ordered = records.clone();
    ordered.sort_by_key(|r| {
        let plan = cfg.plans.iter().position(|p| p.descriptor() == r.plan);
        let imp = cfg
            .imputations
            .iter()
            .position(|m| m.as_str() == r.imputation);
        let alg = cfg
            .algorithms
            .iter()
            .position(|a| a.as_str() == r.algorithm);
        (plan, imp, alg, r.replicate)
    });
    let output = ExperimentOutput {
        summary: summarize(&ordered),
        records,
        restarts,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(cfg, &output, dir)?;
    }
    Ok(output)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records.csv`, `summary.csv`, one pivot file per table layout,
/// `restarts.csv` when restarts were logged, and the resolved configuration
/// as `experiment.toml`.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("records.csv"), &output.records)?;
    write_summary(&dir.join("summary.csv"), &output.summary)?;
    for table in pivot(&output.summary) {
        let mut w = csv::Writer::from_path(dir.join(table.file_name()))?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    if cfg.log_restarts {
        write_csv(&dir.join("restarts.csv"), &output.restarts)?;
    }
    let mut resolved = cfg.clone();
    resolved.output_dir = None;
    fs::write(dir.join("experiment.toml"), resolved.to_toml())?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(path, rows)
}

/// Summary rows in the `summary.csv` format.
pub fn summary_to_string(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

/// Reads a `records.csv` written by [`write_outputs`].
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(format!("records file: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::fit;

    fn iris_cfg(replicates: usize, restarts: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            DatasetSource::Iris,
            vec![MissingnessPlan::new(vec![1], 10.0)],
            vec![ImputationMethod::Knn],
            Algorithm::ALL.to_vec(),
        );
        cfg.replicates = replicates;
        cfg.restarts = restarts;
        cfg
    }

    #[test]
    fn single_complete_run_matches_direct_calls() {
        let mut cfg = iris_cfg(1, 1);
        cfg.plans = vec![MissingnessPlan::new(vec![1], 0.0)];
        cfg.algorithms = vec![Algorithm::Kmahal];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        let iris = load_iris().unwrap();
        let seed = derive_seed(derive_seed(0, &[0]), &[ENGINE_TAG, 0, 0]);
        let f = fit(
            &iris,
            &EngineConfig::new(Algorithm::Kmahal, 3).with_seed(seed),
        )
        .unwrap();
        let truth = iris.labels().unwrap();
        let rec = &out.records[0];
        assert_eq!(
            rec.ari,
            Some(adjusted_rand_index(f.assignments.as_slice(), truth).unwrap())
        );
        assert_eq!(
            rec.nmi,
            Some(normalized_mutual_information(f.assignments.as_slice(), truth).unwrap())
        );
    }

    #[test]
    fn records_are_restart_maxima() {
        let mut cfg = iris_cfg(2, 3);
        cfg.log_restarts = true;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 6);
        assert_eq!(out.restarts.len(), 18);
        for rec in &out.records {
            let runs: Vec<&RestartRecord> = out
                .restarts
                .iter()
                .filter(|r| r.replicate == rec.replicate && r.algorithm == rec.algorithm)
                .collect();
            let max_ari = runs.iter().map(|r| r.ari).fold(f64::NEG_INFINITY, f64::max);
            let max_nmi = runs.iter().map(|r| r.nmi).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(rec.ari, Some(max_ari));
            assert_eq!(rec.nmi, Some(max_nmi));
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = iris_cfg(3, 2);
        let one = with_threads(Some(1), || run_experiment(&cfg))
            .unwrap()
            .unwrap();
        let three = with_threads(Some(3), || run_experiment(&cfg))
            .unwrap()
            .unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn failures_are_isolated() {
        let mut cfg = iris_cfg(1, 1);
        // no mixture reaches this overlap, so every replicate fails
        cfg.dataset = DatasetSource::Generated(crate::datagen::MixtureSpec::new(2, 2, 50, 0.999));
        cfg.plans = vec![MissingnessPlan::new(vec![1], 10.0)];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.records.iter().all(|r| r.status.starts_with("failed: ")));
        assert!(out.summary.is_empty());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = iris_cfg(2, 1);
        cfg.output_dir = Some(dir.path().to_path_buf());
        let out = run_experiment(&cfg).unwrap();
        let back = read_records(dir.path().join("records.csv")).unwrap();
        assert_eq!(back, out.records);
        assert!(dir.path().join("pivot_iris_knn_ari.csv").exists());
        let echoed = ExperimentConfig::load(dir.path().join("experiment.toml")).unwrap();
        assert_eq!(echoed.restarts, 1);
    }
}
