//! External cluster-validity indices against reference labels.
//!
//! Both indices are computed from the contingency table of the two
//! partitions and are invariant to relabeling either side.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Cross-tabulation of two partitions of the same rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[u][v]`: rows in class `u` of the first partition and class
    /// `v` of the second. Classes are ordered by label value.
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape(format!(
                "partitions of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
            let keys: BTreeSet<usize> = labels.iter().copied().collect();
            keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
        };
        let (ia, ib) = (index(a), index(b));
        let mut counts = vec![vec![0u64; ib.len()]; ia.len()];
        for (x, y) in a.iter().zip(b) {
            counts[ia[x]][ib[y]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..ib.len())
            .map(|v| counts.iter().map(|r| r[v]).sum())
            .collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            total: a.len() as u64,
        })
    }
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

fn check(pred: &[usize], truth: &[usize]) -> Result<ContingencyTable> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.total < 2 {
        return Err(Error::UndefinedMetric(format!(
            "partition comparison needs at least 2 rows, got {}",
            table.total
        )));
    }
    Ok(table)
}

/// Hubert-Arabie adjusted Rand index.
pub fn adjusted_rand_index(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = check(pred, truth)?;
    let index: f64 = t.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = t.row_sums.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = t.col_sums.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(t.total);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions trivial (one class each or all singletons) and equal
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

/// Normalized mutual information with geometric-mean normalization,
/// `I(pred; truth) / sqrt(H(pred) H(truth))`, natural logs.
///
/// When an entropy is zero the value is 1 if both partitions are a single
/// class and 0 otherwise.
pub fn normalized_mutual_information(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = check(pred, truth)?;
    let n = t.total as f64;
    let (ha, hb) = (entropy(&t.row_sums, n), entropy(&t.col_sums, n));
    if ha == 0.0 || hb == 0.0 {
        let both_single = t.row_sums.len() == 1 && t.col_sums.len() == 1;
        return Ok(if both_single { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (u, row) in t.counts.iter().enumerate() {
        for (v, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (n * c / (t.row_sums[u] as f64 * t.col_sums[v] as f64)).ln();
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}
