//! Gaussian mixtures with a prescribed maximum pairwise overlap.
//!
//! Component means are drawn in the unit cube and then pushed away from (or
//! pulled towards) their centroid by a common factor `s`. For a draw
//! `x = mu_i(s) + L_i z` the event "component `j` scores higher" is
//!
//! ```text
//! alpha s^2 + 2 u s + v < 0,
//! alpha = |a|^2, a = L_j^{-1} (mu_i - mu_j),  u = a . B z,  B = L_j^{-1} L_i,
//! v = |B z|^2 - |z|^2 + log det Sigma_j - log det Sigma_i (+ weight terms)
//! ```
//!
//! so each Monte Carlo draw misclassifies exactly on an interval of `s`.
//! Storing those intervals once turns every overlap evaluation during the
//! bisection on `s` into two binary searches per pair.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::overlap::{fill_standard_normal, standard_normal, Component, Factored};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Cholesky, SquareMatrix};
use crate::rng;

const COMPONENT_STREAM: u64 = 1;
const COARSE_STREAM: u64 = 2;
const REFINE_STREAM: u64 = 3;
const SAMPLE_STREAM: u64 = 4;

/// Expected misclassified draws per pair in the refinement pass. Sets the
/// relative Monte Carlo error of the calibrated overlap to about 1/sqrt(10000).
const REFINE_HITS: f64 = 10_000.0;
const MAX_STEPS: usize = 60;
const EIGEN_RANGE: (f64, f64) = (0.05, 1.0);

fn default_mc_samples() -> usize {
    20_000
}

fn default_rel_tol() -> f64 {
    0.1
}

/// Shape and separation of a synthetic mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    #[serde(rename = "K")]
    pub k: usize,
    pub p: usize,
    pub n: usize,
    /// Target maximum pairwise overlap.
    pub omega_check: f64,
    #[serde(default)]
    pub seed: u64,
    /// Draws per component and pair in the coarse calibration pass.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_rel_tol")]
    pub calibration_rel_tol: f64,
}

impl MixtureSpec {
    pub fn new(k: usize, p: usize, n: usize, omega_check: f64) -> Self {
        Self {
            k,
            p,
            n,
            omega_check,
            seed: 0,
            mc_samples: default_mc_samples(),
            calibration_rel_tol: default_rel_tol(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!(
                "mixture needs K >= 2, got {}",
                self.k
            )));
        }
        if self.p == 0 || self.n == 0 {
            return Err(Error::Config("mixture needs p >= 1 and n >= 1".into()));
        }
        if !(self.omega_check > 0.0 && self.omega_check < 1.0) {
            return Err(Error::Config(format!(
                "omega_check {} is outside (0, 1)",
                self.omega_check
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        if !(self.calibration_rel_tol > 0.0) {
            return Err(Error::Config("calibration_rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// A generated mixture sample.
#[derive(Debug, Clone)]
pub struct Mixture {
    /// Labelled, fully observed sample; labels are one-based component ids.
    pub data: Dataset,
    /// Calibrated maximum pairwise overlap at `scale`.
    pub achieved_max_overlap: f64,
    /// Zero-based indices of the most overlapping pair.
    pub max_pair: (usize, usize),
    /// Components at the calibrated scale.
    pub components: Vec<Component>,
    /// Factor applied to the mean offsets from their centroid.
    pub scale: f64,
    /// Draws per side used by the refinement pass.
    pub refine_samples: usize,
    /// `(scale, max overlap)` at every point of the refining bisection.
    pub bisection_trace: Vec<(f64, f64)>,
}

/// Serializable summary of a [`Mixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMetadata {
    pub spec: MixtureSpec,
    pub scale: f64,
    pub achieved_max_overlap: f64,
    /// One-based component ids.
    pub max_pair: (usize, usize),
    pub refine_samples: usize,
    pub means: Vec<Vec<f64>>,
    /// Row-major covariance entries per component.
    pub covariances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Mixture {
    pub fn metadata(&self, spec: &MixtureSpec) -> MixtureMetadata {
        MixtureMetadata {
            spec: spec.clone(),
            scale: self.scale,
            achieved_max_overlap: self.achieved_max_overlap,
            max_pair: (self.max_pair.0 + 1, self.max_pair.1 + 1),
            refine_samples: self.refine_samples,
            means: self.components.iter().map(|c| c.mean.clone()).collect(),
            covariances: self
                .components
                .iter()
                .map(|c| c.covariance.as_slice().to_vec())
                .collect(),
            weights: self.components.iter().map(|c| c.weight).collect(),
        }
    }
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix; columns
/// are the basis vectors.
fn random_orthogonal(rng: &mut rng::StreamRng, p: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    while cols.len() < p {
        let mut v = standard_normal(rng, p);
        for q in &cols {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a draw (almost) inside the span so far is simply redrawn
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    cols
}

fn random_covariance(rng: &mut rng::StreamRng, p: usize) -> Result<SquareMatrix> {
    let q = random_orthogonal(rng, p);
    let (lo, hi) = (EIGEN_RANGE.0.ln(), EIGEN_RANGE.1.ln());
    let lambda: Vec<f64> = (0..p).map(|_| rng.random_range(lo..hi).exp()).collect();
    let mut m = vec![0.0; p * p];
    for r in 0..p {
        for c in r..p {
            let v: f64 = (0..p).map(|t| q[t][r] * lambda[t] * q[t][c]).sum();
            m[r * p + c] = v;
            m[c * p + r] = v;
        }
    }
    SquareMatrix::new(p, m)
}

/// Misclassification intervals of one ordered pair, as sorted endpoints.
struct Intervals {
    starts: Vec<f64>,
    ends: Vec<f64>,
}

impl Intervals {
    fn new(raw: Vec<(f64, f64)>) -> Self {
        let mut starts: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let mut ends: Vec<f64> = raw.iter().map(|r| r.1).collect();
        starts.sort_by(f64::total_cmp);
        ends.sort_by(f64::total_cmp);
        Self { starts, ends }
    }

    /// Draws misclassified at scale `s`: `#{start < s} - #{end <= s}`.
    fn count(&self, s: f64) -> usize {
        self.starts.partition_point(|&a| a < s) - self.ends.partition_point(|&b| b <= s)
    }
}

/// Draws from `from` and records, for each, the open interval of scales on
/// which `to` scores higher. Draws whose interval misses `window` are dropped.
fn side_intervals(
    from: &Factored,
    to: &Factored,
    delta: &[f64],
    samples: usize,
    seed: u64,
    tags: &[u64],
    window: (f64, f64),
) -> Intervals {
    let mut a = delta.to_vec();
    to.chol.forward_in_place(&mut a);
    let alpha: f64 = a.iter().map(|x| x * x).sum();
    let p = delta.len();
    let mut rng = rng::stream(seed, tags);
    let mut raw = Vec::new();
    let (mut z, mut bz) = (vec![0.0; p], vec![0.0; p]);
    for _ in 0..samples {
        fill_standard_normal(&mut rng, &mut z);
        from.chol.lower_mul_into(&z, &mut bz);
        to.chol.forward_in_place(&mut bz);
        let u: f64 = a.iter().zip(&bz).map(|(x, y)| x * y).sum();
        let v = bz.iter().map(|x| x * x).sum::<f64>() - z.iter().map(|x| x * x).sum::<f64>()
            + to.offset
            - from.offset;
        let (r1, r2) = if alpha > 0.0 {
            let disc = u * u - alpha * v;
            if disc <= 0.0 {
                continue;
            }
            let root = disc.sqrt();
            ((-u - root) / alpha, (-u + root) / alpha)
        } else if v < 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            continue;
        };
        if r2 > window.0 && r1 < window.1 {
            raw.push((r1, r2));
        }
    }
    Intervals::new(raw)
}

/// Overlap of every pair as a function of the scale.
struct PairTable {
    pairs: Vec<(usize, usize)>,
    sides: Vec<(Intervals, Intervals)>,
    samples: usize,
}

impl PairTable {
    fn build(
        base: &[Component],
        pairs: Vec<(usize, usize)>,
        samples: usize,
        seed: u64,
        stream: u64,
        window: (f64, f64),
    ) -> Result<Self> {
        let factored = base.iter().map(Factored::new).collect::<Result<Vec<_>>>()?;
        let sides = pairs
            .par_iter()
            .map(|&(i, j)| {
                let d_ij: Vec<f64> = base[i]
                    .mean
                    .iter()
                    .zip(&base[j].mean)
                    .map(|(x, y)| x - y)
                    .collect();
                let d_ji: Vec<f64> = d_ij.iter().map(|x| -x).collect();
                let tag = |side: u64| [stream, i as u64, j as u64, side];
                let (fi, fj) = (&factored[i], &factored[j]);
                (
                    side_intervals(fi, fj, &d_ij, samples, seed, &tag(0), window),
                    side_intervals(fj, fi, &d_ji, samples, seed, &tag(1), window),
                )
            })
            .collect();
        Ok(Self {
            pairs,
            sides,
            samples,
        })
    }

    fn overlap(&self, idx: usize, s: f64) -> f64 {
        let (a, b) = &self.sides[idx];
        (a.count(s) + b.count(s)) as f64 / self.samples as f64
    }

    /// Maximum overlap at scale `s` and the pair attaining it.
    fn max(&self, s: f64) -> (f64, usize) {
        (0..self.pairs.len()).map(|i| (self.overlap(i, s), i)).fold(
            (f64::NEG_INFINITY, 0),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        )
    }
}

/// Bisection for the scale where the maximum overlap drops to `target`.
/// Returns `(lo, hi)` with `f(lo) > target >= f(hi)` and the visited points.
fn bisect(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    target: f64,
) -> (f64, f64, Vec<(f64, f64)>) {
    let mut trace = Vec::with_capacity(MAX_STEPS);
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        trace.push((mid, v));
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi, trace)
}

/// Draws a mixture whose maximum pairwise overlap matches
/// `spec.omega_check`, then samples `spec.n` labelled points from it.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let (k, p, target) = (spec.k, spec.p, spec.omega_check);
    let mut rng = rng::stream(spec.seed, &[COMPONENT_STREAM]);
    let raw_means: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
        .collect();
    let centroid: Vec<f64> = (0..p)
        .map(|j| raw_means.iter().map(|m| m[j]).sum::<f64>() / k as f64)
        .collect();
    let base = raw_means
        .iter()
        .map(|m| {
            let offset = m.iter().zip(&centroid).map(|(a, c)| a - c).collect();
            Component::new(offset, random_covariance(&mut rng, p)?, 1.0 / k as f64)
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let all = (f64::NEG_INFINITY, f64::INFINITY);

    // coarse pass over every pair
    let coarse = PairTable::build(&base, pairs, spec.mc_samples, spec.seed, COARSE_STREAM, all)?;
    let at_zero = coarse.max(0.0).0;
    if at_zero <= target {
        return Err(Error::Calibration {
            reason: format!("target {target} is not below the overlap of coincident means"),
            achieved: at_zero,
        });
    }
    let mut hi = 1.0;
    let mut steps = 0;
    while coarse.max(hi).0 > target {
        hi *= 2.0;
        steps += 1;
        if steps >= MAX_STEPS {
            return Err(Error::Calibration {
                reason: "could not bracket the target overlap".into(),
                achieved: coarse.max(hi).0,
            });
        }
    }
    let (_, s0, _) = bisect(|s| coarse.max(s).0, 0.0, hi, target);

    // refinement of the pairs that can matter near s0
    let candidates: Vec<(usize, usize)> = (0..coarse.pairs.len())
        .filter(|&i| coarse.overlap(i, s0) >= 0.25 * target)
        .map(|i| coarse.pairs[i])
        .collect();
    let refine_samples = spec.mc_samples.max((REFINE_HITS / target).ceil() as usize);
    let window = (0.25 * s0, 4.0 * s0);
    let fine = PairTable::build(
        &base,
        candidates,
        refine_samples,
        spec.seed,
        REFINE_STREAM,
        window,
    )?;
    let (f_lo, f_hi) = (fine.max(window.0).0, fine.max(window.1).0);
    if !(f_lo > target && f_hi <= target) {
        return Err(Error::Calibration {
            reason: "refined overlap does not bracket the target near the coarse scale".into(),
            achieved: fine.max(s0).0,
        });
    }
    let (lo, hi, mut trace) = bisect(|s| fine.max(s).0, window.0, window.1, target);
    trace.insert(0, (window.0, f_lo));
    trace.push((window.1, f_hi));
    let (v_lo, v_hi) = (fine.max(lo), fine.max(hi));
    let (scale, (achieved, pair_idx)) = if v_lo.0 - target < target - v_hi.0 {
        (lo, v_lo)
    } else {
        (hi, v_hi)
    };
    if (achieved - target).abs() > spec.calibration_rel_tol * target {
        return Err(Error::Calibration {
            reason: format!(
                "overlap {achieved} misses {target} by more than {}",
                spec.calibration_rel_tol
            ),
            achieved,
        });
    }

    let components: Vec<Component> = base
        .into_iter()
        .map(|c| Component {
            mean: c
                .mean
                .iter()
                .zip(&centroid)
                .map(|(o, m)| m + scale * o)
                .collect(),
            ..c
        })
        .collect();
    let data = sample(&components, spec.n, spec.seed)?;
    Ok(Mixture {
        data,
        achieved_max_overlap: achieved,
        max_pair: fine.pairs[pair_idx],
        components,
        scale,
        refine_samples,
        bisection_trace: trace,
    })
}

/// Draws `n` labelled points, each from a uniformly chosen component.
fn sample(components: &[Component], n: usize, seed: u64) -> Result<Dataset> {
    let factors = components
        .iter()
        .map(|c| Cholesky::new(&c.covariance))
        .collect::<Result<Vec<_>>>()?;
    let p = components[0].dim();
    let mut rng = rng::stream(seed, &[SAMPLE_STREAM]);
    let mut values = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..components.len());
        let z = standard_normal(&mut rng, p);
        let x = factors[c].lower_mul(&z);
        values.extend(x.iter().zip(&components[c].mean).map(|(a, m)| a + m));
        labels.push(c + 1);
    }
    Dataset::complete(n, p, values, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eigenvalues;

    #[test]
    fn covariances_have_the_stated_spectrum() {
        let mut rng = rng::stream(9, &[]);
        for _ in 0..20 {
            let m = random_covariance(&mut rng, 4).unwrap();
            let ev = sym_eigenvalues(&m).unwrap();
            assert!(ev[0] <= 1.0 + 1e-12 && ev[3] >= 0.05 - 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn interval_counting() {
        let iv = Intervals::new(vec![(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)]);
        assert_eq!(iv.count(0.75), 2);
        assert_eq!(iv.count(1.0), 1);
        assert_eq!(iv.count(2.5), 0);
        assert_eq!(iv.count(3.5), 1);
    }

    #[test]
    fn small_mixture_is_calibrated_and_reproducible() {
        let spec = MixtureSpec::new(3, 2, 300, 0.05).with_seed(11);
        let a = generate_mixture(&spec).unwrap();
        let b = generate_mixture(&spec).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.scale.to_bits(), b.scale.to_bits());
        assert!((a.achieved_max_overlap - 0.05).abs() <= 0.005);
        assert_eq!(a.data.n(), 300);
        let labels = a.data.labels().unwrap();
        assert!(labels.iter().all(|&l| (1..=3).contains(&l)));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_mixture(&MixtureSpec::new(1, 2, 10, 0.1)).is_err());
        assert!(generate_mixture(&MixtureSpec::new(2, 2, 10, 1.0)).is_err());
        assert!(generate_mixture(&MixtureSpec::new(2, 2, 10, 0.0)).is_err());
    }
}
