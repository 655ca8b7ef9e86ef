use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

const MISSING_STREAM: u64 = 0x6d69_7373;

fn default_true() -> bool {
    true
}

/// Which coordinates lose cells, and in what share of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessPlan {
    /// One-based coordinate indices.
    pub coords: Vec<usize>,
    /// Percentage of rows masked in each listed coordinate.
    pub d_percent: f64,
    /// Mask each coordinate in its own random row set (true) or all listed
    /// coordinates in one shared row set (false).
    #[serde(default = "default_true")]
    pub per_coordinate: bool,
}

impl MissingnessPlan {
    pub fn new(coords: Vec<usize>, d_percent: f64) -> Self {
        Self {
            coords,
            d_percent,
            per_coordinate: true,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::Config(
                "missingness plan lists no coordinates".into(),
            ));
        }
        for (i, &c) in self.coords.iter().enumerate() {
            if c == 0 || c > p {
                return Err(Error::Config(format!(
                    "coordinate c{c} is outside c1..c{p}"
                )));
            }
            if self.coords[..i].contains(&c) {
                return Err(Error::Config(format!("coordinate c{c} listed twice")));
            }
        }
        if !(0.0..=100.0).contains(&self.d_percent) {
            return Err(Error::Config(format!(
                "d_percent {} is outside [0, 100]",
                self.d_percent
            )));
        }
        if !self.per_coordinate && self.coords.len() == p && self.d_percent > 0.0 {
            return Err(Error::Config(
                "jointly masking every coordinate would empty rows".into(),
            ));
        }
        Ok(())
    }

    /// Masked cells per listed coordinate: `round(n * d / 100)`, halves
    /// rounded away from zero.
    pub fn cells_per_coordinate(&self, n: usize) -> usize {
        (n as f64 * self.d_percent / 100.0).round() as usize
    }

    /// Short text form such as `c3+c4@10%`.
    pub fn descriptor(&self) -> String {
        let coords: Vec<String> = self.coords.iter().map(|c| format!("c{c}")).collect();
        format!("{}@{}%", coords.join("+"), self.d_percent)
    }
}

/// Masks cells of a complete dataset completely at random.
///
/// Each listed coordinate loses exactly
/// [`cells_per_coordinate`](MissingnessPlan::cells_per_coordinate) cells in
/// rows drawn uniformly without replacement. When that would leave a row
/// with no observed cell, one of its masks is moved to another row.
pub fn inject_missing(ds: &Dataset, plan: &MissingnessPlan, seed: u64) -> Result<Dataset> {
    let (n, p) = (ds.n(), ds.p());
    plan.validate(p)?;
    if !ds.is_complete() {
        return Err(Error::InvalidDataset(
            "missingness is injected into fully observed datasets only".into(),
        ));
    }
    let count = plan.cells_per_coordinate(n);
    let mut mask = vec![true; n * p];
    if count == 0 {
        return Ok(ds.clone());
    }
    if plan.per_coordinate {
        for &c in &plan.coords {
            let mut rng = rng::stream(seed, &[MISSING_STREAM, c as u64]);
            for i in index::sample(&mut rng, n, count) {
                mask[i * p + c - 1] = false;
            }
        }
    } else {
        let mut rng = rng::stream(seed, &[MISSING_STREAM]);
        for i in index::sample(&mut rng, n, count) {
            for &c in &plan.coords {
                mask[i * p + c - 1] = false;
            }
        }
    }

    let empty = |mask: &[bool], i: usize| mask[i * p..(i + 1) * p].iter().all(|&m| !m);
    let mut rng = rng::stream(seed, &[MISSING_STREAM, u64::MAX]);
    for i in 0..n {
        if !empty(&mask, i) {
            continue;
        }
        let c = plan.coords[rng.random_range(0..plan.coords.len())] - 1;
        // rows where moving the mask keeps both rows non-empty
        let targets: Vec<usize> = (0..n)
            .filter(|&r| r != i && mask[r * p + c])
            .filter(|&r| (0..p).filter(|&j| j != c).any(|j| mask[r * p + j]))
            .collect();
        if targets.is_empty() {
            return Err(Error::Config(format!(
                "cannot mask {count} cells per coordinate without emptying a row"
            )));
        }
        let r = targets[rng.random_range(0..targets.len())];
        mask[i * p + c] = true;
        mask[r * p + c] = false;
    }
    ds.with_extra_mask(&mask)
}
