//! Monte Carlo estimates of the pairwise overlap of Gaussian components.
//!
//! The overlap of components `i` and `j` is the two-sided misclassification
//! probability `P_i[w_j f_j(X) > w_i f_i(X)] + P_j[w_i f_i(X) > w_j f_j(X)]`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{Cholesky, SquareMatrix};
use crate::rng;

/// One Gaussian mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mean: Vec<f64>,
    pub covariance: SquareMatrix,
    pub weight: f64,
}

impl Component {
    pub fn new(mean: Vec<f64>, covariance: SquareMatrix, weight: f64) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::Shape(format!(
                "mean of length {} with a {}x{} covariance",
                mean.len(),
                covariance.dim(),
                covariance.dim()
            )));
        }
        if !(weight > 0.0) {
            return Err(Error::Config(format!(
                "component weight {weight} is not positive"
            )));
        }
        Ok(Self {
            mean,
            covariance,
            weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A component with its covariance factored.
pub(crate) struct Factored<'a> {
    pub comp: &'a Component,
    pub chol: Cholesky,
    /// `log det Sigma - 2 log w`, the constant part of `-2 log(w f(x))`.
    pub offset: f64,
}

impl<'a> Factored<'a> {
    pub fn new(comp: &'a Component) -> Result<Self> {
        let chol = Cholesky::new(&comp.covariance)?;
        let offset = chol.log_det() - 2.0 * comp.weight.ln();
        Ok(Self { comp, chol, offset })
    }

    /// `-2 log(w f(x))` up to a constant shared by all components.
    fn score(&self, x: &[f64]) -> f64 {
        self.chol.mahalanobis_sq(x, &self.comp.mean) + self.offset
    }
}

pub(crate) fn standard_normal(rng: &mut rng::StreamRng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.sample(StandardNormal)).collect()
}

pub(crate) fn fill_standard_normal(rng: &mut rng::StreamRng, z: &mut [f64]) {
    for v in z {
        *v = rng.sample(StandardNormal);
    }
}

/// Share of `samples` draws from `from` that `to` claims, ties counted half.
fn one_sided(from: &Factored, to: &Factored, samples: usize, seed: u64, tags: &[u64]) -> f64 {
    let mut rng = rng::stream(seed, tags);
    let p = from.comp.dim();
    let (mut z, mut x) = (vec![0.0; p], vec![0.0; p]);
    let mut hits = 0.0;
    for _ in 0..samples {
        fill_standard_normal(&mut rng, &mut z);
        from.chol.lower_mul_into(&z, &mut x);
        for (xi, m) in x.iter_mut().zip(&from.comp.mean) {
            *xi += m;
        }
        let (own, other) = (from.score(&x), to.score(&x));
        if other < own {
            hits += 1.0;
        } else if other == own {
            hits += 0.5;
        }
    }
    hits / samples as f64
}

/// Monte Carlo estimate of the overlap of two components, using
/// `mc_samples` draws from each.
///
/// Points where both weighted densities agree exactly count as half a
/// misclassification, so two identical components give exactly 1.
pub fn estimate_pairwise_overlap(
    comp_i: &Component,
    comp_j: &Component,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if comp_i.dim() != comp_j.dim() {
        return Err(Error::Shape("components of different dimension".into()));
    }
    if mc_samples == 0 {
        return Err(Error::Config("mc_samples must be positive".into()));
    }
    let (fi, fj) = (Factored::new(comp_i)?, Factored::new(comp_j)?);
    Ok(one_sided(&fi, &fj, mc_samples, seed, &[0]) + one_sided(&fj, &fi, mc_samples, seed, &[1]))
}

/// The most overlapping pair of a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxOverlap {
    /// Zero-based component indices, `i < j`.
    pub pair: (usize, usize),
    pub value: f64,
}

/// Estimates the maximum pairwise overlap of `components`.
///
/// Every pair is screened with `screen_samples` draws per side; pairs whose
/// screened overlap is at least a quarter of the largest one are then
/// re-estimated with `refine_samples` draws, and the largest refined value is
/// returned.
pub fn max_pairwise_overlap(
    components: &[Component],
    screen_samples: usize,
    refine_samples: usize,
    seed: u64,
) -> Result<MaxOverlap> {
    if components.len() < 2 {
        return Err(Error::Config(
            "overlap needs at least two components".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..components.len())
        .flat_map(|i| (i + 1..components.len()).map(move |j| (i, j)))
        .collect();
    let estimate = |(i, j): (usize, usize), samples: usize, phase: u64| {
        let s = rng::derive_seed(seed, &[phase, i as u64, j as u64]);
        estimate_pairwise_overlap(&components[i], &components[j], samples, s)
    };
    let screened = pairs
        .par_iter()
        .map(|&pair| estimate(pair, screen_samples, 0))
        .collect::<Result<Vec<f64>>>()?;
    let top = screened.iter().copied().fold(0.0, f64::max);
    let refined = pairs
        .par_iter()
        .zip(&screened)
        .filter(|(_, &v)| v >= 0.25 * top)
        .map(|(&pair, _)| Ok((pair, estimate(pair, refine_samples.max(screen_samples), 1)?)))
        .collect::<Result<Vec<_>>>()?;
    let (pair, value) = refined
        .into_iter()
        .fold(((0, 1), f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    Ok(MaxOverlap { pair, value })
}
