use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RunRecord;

/// Median and spread of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub plan: String,
    pub coords: String,
    pub d_percent: f64,
    pub algorithm: String,
    pub imputation: String,
    pub median_ari: f64,
    pub iqr_ari: f64,
    pub median_nmi: f64,
    pub iqr_nmi: f64,
    /// Replicates with a result.
    pub replicates: usize,
    /// Replicates whose cell failed.
    pub failures: usize,
}

/// Type-7 sample quantile: linear interpolation between order statistics
/// at position `q (n - 1)` (zero-based). `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median: the middle order statistic, or the mean of the two middle ones.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// `Q3 - Q1` with type-7 quartiles.
pub fn iqr(sorted: &[f64]) -> f64 {
    quantile(sorted, 0.75) - quantile(sorted, 0.25)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Groups records by (dataset, plan, algorithm, imputation), in order of
/// first appearance, and summarizes each group's successful replicates.
/// Groups without any successful replicate are skipped with a warning.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (
            r.dataset.clone(),
            r.plan.clone(),
            r.algorithm.clone(),
            r.imputation.clone(),
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let group = &groups[&key];
        let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.is_ok()).collect();
        if ok.is_empty() {
            log::warn!("no successful replicates for {key:?}; group skipped");
            continue;
        }
        let ari = sorted(ok.iter().filter_map(|r| r.ari).collect());
        let nmi = sorted(ok.iter().filter_map(|r| r.nmi).collect());
        let first = group[0];
        rows.push(SummaryRow {
            dataset: key.0,
            plan: key.1,
            coords: first.coords.clone(),
            d_percent: first.d_percent,
            algorithm: key.2,
            imputation: key.3,
            median_ari: median(&ari),
            iqr_ari: iqr(&ari),
            median_nmi: median(&nmi),
            iqr_nmi: iqr(&nmi),
            replicates: ok.len(),
            failures: group.len() - ok.len(),
        });
    }
    rows
}

/// Which index a pivot table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ari,
    Nmi,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ari => "ari",
            Metric::Nmi => "nmi",
        }
    }
}

/// A table in the layout of the published result tables: one row per
/// missing percentage, one median and one IQR column per coordinate set and
/// algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Pivot {
    pub dataset: String,
    pub imputation: String,
    pub metric: Metric,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Pivot {
    /// File name such as `pivot_iris_knn_ari.csv`.
    pub fn file_name(&self) -> String {
        format!(
            "pivot_{}_{}_{}.csv",
            self.dataset,
            self.imputation,
            self.metric.as_str()
        )
    }
}

/// Pivots summary rows into one table per (dataset, imputation, metric).
pub fn pivot(summary: &[SummaryRow]) -> Vec<Pivot> {
    let mut tables: Vec<(String, String)> = Vec::new();
    for r in summary {
        let key = (r.dataset.clone(), r.imputation.clone());
        if !tables.contains(&key) {
            tables.push(key);
        }
    }
    let mut out = Vec::new();
    for (dataset, imputation) in tables {
        let rows: Vec<&SummaryRow> = summary
            .iter()
            .filter(|r| r.dataset == dataset && r.imputation == imputation)
            .collect();
        let mut columns: Vec<(String, String)> = Vec::new();
        let mut percents: Vec<f64> = Vec::new();
        for r in &rows {
            let col = (r.coords.clone(), r.algorithm.clone());
            if !columns.contains(&col) {
                columns.push(col);
            }
            if !percents.contains(&r.d_percent) {
                percents.push(r.d_percent);
            }
        }
        percents.sort_by(f64::total_cmp);
        for metric in [Metric::Ari, Metric::Nmi] {
            let mut header = vec!["d_percent".to_string()];
            for (coords, alg) in &columns {
                header.push(format!("{coords} {alg} median"));
                header.push(format!("{coords} {alg} iqr"));
            }
            let body = percents
                .iter()
                .map(|&d| {
                    let mut line = vec![d.to_string()];
                    for (coords, alg) in &columns {
                        let cell = rows.iter().find(|r| {
                            r.d_percent == d && &r.coords == coords && &r.algorithm == alg
                        });
                        match cell {
                            Some(r) => {
                                let (m, q) = match metric {
                                    Metric::Ari => (r.median_ari, r.iqr_ari),
                                    Metric::Nmi => (r.median_nmi, r.iqr_nmi),
                                };
                                line.push(m.to_string());
                                line.push(q.to_string());
                            }
                            None => line.extend([String::new(), String::new()]),
                        }
                    }
                    line
                })
                .collect();
            out.push(Pivot {
                dataset: dataset.clone(),
                imputation: imputation.clone(),
                metric,
                header,
                rows: body,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_convention() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(median(&v), 2.0);
        assert_eq!(iqr(&v), 1.0);
        assert_eq!(quantile(&v, 0.25), 1.5);
        assert_eq!(iqr(&[0.4; 7]), 0.0);
        assert_eq!(median(&[0.1, 0.9]), 0.5);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }

    fn record(rep: usize, alg: &str, ari: Option<f64>) -> RunRecord {
        RunRecord {
            replicate: rep,
            dataset: "iris".into(),
            plan: "c1@10%".into(),
            coords: "c1".into(),
            d_percent: 10.0,
            imputation: "knn".into(),
            algorithm: alg.into(),
            ari,
            nmi: ari,
            criterion_a: ari,
            status: if ari.is_some() {
                "ok".into()
            } else {
                "failed: boom".into()
            },
        }
    }

    #[test]
    fn groups_and_failures() {
        let recs = vec![
            record(1, "kmahal", Some(0.9)),
            record(1, "kmeans", Some(0.7)),
            record(2, "kmahal", None),
            record(2, "kmeans", Some(0.8)),
            record(3, "kmahal", Some(0.5)),
        ];
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].algorithm, "kmahal");
        assert_eq!((rows[0].replicates, rows[0].failures), (2, 1));
        assert!((rows[0].median_ari - 0.7).abs() < 1e-15);
        assert!((rows[1].median_ari - 0.75).abs() < 1e-15);
        assert!(summarize(&[record(1, "kmahal", None)]).is_empty());
    }

    #[test]
    fn pivot_layout() {
        let rows = summarize(&[
            record(1, "kmahal", Some(0.9)),
            record(1, "kmeans", Some(0.7)),
        ]);
        let tables = pivot(&rows);
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].file_name(), "pivot_iris_knn_ari.csv");
        assert_eq!(tables[0].header[1], "c1 kmahal median");
        assert_eq!(tables[0].rows, vec![vec!["10", "0.9", "0", "0.7", "0"]]);
    }
}
