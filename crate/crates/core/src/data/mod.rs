//! Datasets with missing cells, hard assignments and fitted cluster models.

mod csv_io;
mod model;

pub use model::{Algorithm, Assignments, ClusterModel, EngineConfig, InitMethod, RestartSelection};

use crate::error::{Error, Result};

/// Observed/missing split of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSplit {
    /// Observed coordinate indices, ascending.
    pub observed: Vec<usize>,
    /// Missing coordinate indices, ascending.
    pub missing: Vec<usize>,
    /// Values at `observed`, in the same order.
    pub values: Vec<f64>,
}

/// An `n x p` numeric matrix with a missingness mask and optional labels.
///
/// Masked cells hold `NaN`; every accessor consults the mask. Each row has
/// at least one observed coordinate.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    labels: Option<Vec<usize>>,
}

/// Equal shape, mask and labels, and identical observed cells.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.p == other.p
            && self.mask == other.mask
            && self.labels == other.labels
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| !m || a.to_bits() == b.to_bits())
    }
}

impl Dataset {
    /// Builds a dataset from row-major `values` and `mask` (true = observed).
    pub fn new(
        n: usize,
        p: usize,
        mut values: Vec<f64>,
        mask: Vec<bool>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidDataset("dataset has no coordinates".into()));
        }
        if values.len() != n * p || mask.len() != n * p {
            return Err(Error::InvalidDataset(format!(
                "expected {} cells for {n}x{p}, got {} values and {} mask entries",
                n * p,
                values.len(),
                mask.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {n} rows",
                    l.len()
                )));
            }
        }
        for i in 0..n {
            let row = &mask[i * p..(i + 1) * p];
            if !row.iter().any(|&m| m) {
                return Err(Error::InvalidDataset(format!(
                    "row {} has no observed coordinates",
                    i + 1
                )));
            }
            for j in 0..p {
                let cell = i * p + j;
                if row[j] {
                    if !values[cell].is_finite() {
                        return Err(Error::InvalidDataset(format!(
                            "observed cell ({}, c{}) is not finite",
                            i + 1,
                            j + 1
                        )));
                    }
                } else {
                    values[cell] = f64::NAN;
                }
            }
        }
        Ok(Self {
            n,
            p,
            values,
            mask,
            labels,
        })
    }

    /// A dataset with every cell observed.
    pub fn complete(
        n: usize,
        p: usize,
        values: Vec<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        Self::new(n, p, values, vec![true; n * p], labels)
    }

    /// Builds a dataset from rows of optional values (`None` = missing).
    pub fn from_rows(rows: &[Vec<Option<f64>>], labels: Option<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * p);
        let mut mask = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {} has {} cells, expected {p}",
                    i + 1,
                    row.len()
                )));
            }
            for cell in row {
                values.push(cell.unwrap_or(f64::NAN));
                mask.push(cell.is_some());
            }
        }
        Self::new(n, p, values, mask, labels)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.p + col]
    }

    /// The cell value, or `None` when masked.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.is_observed(row, col)
            .then(|| self.values[row * self.p + col])
    }

    /// Raw row values; masked cells are `NaN`.
    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.p..(row + 1) * self.p]
    }

    pub fn mask_row(&self, row: usize) -> &[bool] {
        &self.mask[row * self.p..(row + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {} rows",
                    l.len(),
                    self.n
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Number of masked cells per coordinate.
    pub fn missing_per_column(&self) -> Vec<usize> {
        let mut counts = vec![0; self.p];
        for (cell, &m) in self.mask.iter().enumerate() {
            if !m {
                counts[cell % self.p] += 1;
            }
        }
        counts
    }

    /// Splits row `row` (zero-based) into observed and missing coordinates.
    pub fn split_row(&self, row: usize) -> Result<RowSplit> {
        if row >= self.n {
            return Err(Error::Index {
                index: row,
                len: self.n,
            });
        }
        let mut split = RowSplit {
            observed: Vec::new(),
            missing: Vec::new(),
            values: Vec::new(),
        };
        for j in 0..self.p {
            if self.is_observed(row, j) {
                split.observed.push(j);
                split.values.push(self.values[row * self.p + j]);
            } else {
                split.missing.push(j);
            }
        }
        Ok(split)
    }

    /// Observed values with every masked cell replaced by the matching entry
    /// of `fill` (an `n x p` row-major matrix).
    pub fn fill_missing(&self, fill: &[f64]) -> Result<Vec<f64>> {
        if fill.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "fill matrix has {} cells, dataset has {}",
                fill.len(),
                self.values.len()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&self.mask)
            .zip(fill)
            .map(|((&v, &m), &f)| if m { v } else { f })
            .collect())
    }

    /// A fully observed copy whose cells are `values`, keeping the labels.
    pub fn completed_with(&self, values: Vec<f64>) -> Result<Self> {
        Self::complete(self.n, self.p, values, self.labels.clone())
    }

    /// A copy with the given mask applied on top of the current one.
    pub fn with_extra_mask(&self, extra: &[bool]) -> Result<Self> {
        let mask = self.mask.iter().zip(extra).map(|(&a, &b)| a && b).collect();
        Self::new(
            self.n,
            self.p,
            self.values.clone(),
            mask,
            self.labels.clone(),
        )
    }

    /// Per-column mean over observed cells; `None` for fully masked columns.
    pub fn column_means(&self) -> Vec<Option<f64>> {
        (0..self.p)
            .map(|j| {
                let (sum, count) = (0..self.n)
                    .filter_map(|i| self.get(i, j))
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                (count > 0).then(|| sum / count as f64)
            })
            .collect()
    }

    /// A dataset made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        let mut mask = Vec::with_capacity(rows.len() * self.p);
        for &r in rows {
            if r >= self.n {
                return Err(Error::Index {
                    index: r,
                    len: self.n,
                });
            }
            values.extend_from_slice(self.row(r));
            mask.extend_from_slice(self.mask_row(r));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect());
        Self::new(rows.len(), self.p, values, mask, labels)
    }
}
