use super::init::{repair_empty, seed_centers};
use super::{criterion_a, FitResult};
use crate::data::{Algorithm, Assignments, ClusterModel, Dataset, EngineConfig};
use crate::error::{Error, Result};
use crate::numerics::{regularize_spd, Cholesky, SquareMatrix};
use crate::rng;

/// Where a single engine run takes its initial centers from.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    /// Draw centers with `cfg.init` from the stream `(cfg.seed, restart)`.
    Seeded { restart: usize },
    /// Use these centers (K vectors of length p).
    Centers(Vec<Vec<f64>>),
}

/// Covariance handling of the Mahalanobis engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMode {
    /// Maximum-likelihood cluster covariances, eigenvalue-floored.
    #[default]
    Estimated,
    /// Every covariance held at the identity. The engine then reduces to
    /// Euclidean K-means with center filling.
    Identity,
}

/// One run of the configured engine from one initialization.
///
/// `start` is a completed copy of `ds` supplying the initial values of the
/// missing cells; its observed cells must agree with `ds`.
pub fn fit_single(
    ds: &Dataset,
    start: &Dataset,
    cfg: &EngineConfig,
    init: &Initialization,
    mode: CovarianceMode,
) -> Result<FitResult> {
    cfg.validate()?;
    let (n, p, k) = (ds.n(), ds.p(), cfg.k);
    if k > n {
        return Err(Error::Config(format!(
            "K = {k} exceeds the {n} rows of the dataset"
        )));
    }
    if start.n() != n || start.p() != p || !start.is_complete() {
        return Err(Error::Shape(
            "the starting dataset must be a completed copy of the input".into(),
        ));
    }
    let x0 = ds.fill_missing(start.values())?;
    let (centers, restart) = match init {
        Initialization::Seeded { restart } => {
            let mut rng = rng::stream(cfg.seed, &[*restart as u64]);
            (seed_centers(&x0, p, k, cfg.init, &mut rng), *restart)
        }
        Initialization::Centers(c) => {
            if c.len() != k || c.iter().any(|v| v.len() != p) {
                return Err(Error::Shape(format!("expected {k} centers of length {p}")));
            }
            (c.clone(), 0)
        }
    };

    let problem = Problem {
        ds,
        p,
        k,
        cfg,
        floor: cfg.cov_floor * data_scale(&x0, p),
    };
    let run = match cfg.algorithm {
        Algorithm::Kmeans => problem.lloyd(x0, centers, false),
        Algorithm::UnifiedKmeans => problem.lloyd(x0, centers, true),
        Algorithm::Kmahal => problem.kmahal(x0, centers, mode)?,
    };
    problem.finish(run, restart)
}

/// Mean per-coordinate variance, the reference scale of the covariance floor.
fn data_scale(x: &[f64], p: usize) -> f64 {
    let n = x.len() / p;
    let mut total = 0.0;
    for j in 0..p {
        let mean = (0..n).map(|i| x[i * p + j]).sum::<f64>() / n as f64;
        total += (0..n).map(|i| (x[i * p + j] - mean).powi(2)).sum::<f64>() / n as f64;
    }
    let scale = total / p as f64;
    if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        1.0
    }
}

struct Run {
    x: Vec<f64>,
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    covariances: Option<Vec<SquareMatrix>>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

struct Problem<'a> {
    ds: &'a Dataset,
    p: usize,
    k: usize,
    cfg: &'a EngineConfig,
    floor: f64,
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.ds.n()
    }

    fn row<'x>(&self, x: &'x [f64], i: usize) -> &'x [f64] {
        &x[i * self.p..(i + 1) * self.p]
    }

    fn stop(&self, trace: &[f64]) -> bool {
        match trace {
            [.., prev, cur] => prev - cur <= self.cfg.epsilon0 * cur.abs(),
            _ => false,
        }
    }

    /// Nearest cluster under `dist`, ties to the lowest index.
    fn assign(
        &self,
        x: &[f64],
        dist: impl Fn(&[f64], usize) -> f64,
    ) -> (Vec<usize>, Vec<f64>, Vec<usize>) {
        let n = self.n();
        let mut labels = vec![0; n];
        let mut dists = vec![0.0; n];
        let mut counts = vec![0; self.k];
        for i in 0..n {
            let xi = self.row(x, i);
            let (mut best, mut best_d) = (0, dist(xi, 0));
            for c in 1..self.k {
                let d = dist(xi, c);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            labels[i] = best;
            dists[i] = best_d;
            counts[best] += 1;
        }
        repair_empty(&mut labels, &mut dists, &mut counts);
        (labels, dists, counts)
    }

    fn means(&self, x: &[f64], labels: &[usize], counts: &[usize]) -> Vec<Vec<f64>> {
        let mut centers = vec![vec![0.0; self.p]; self.k];
        for (i, &l) in labels.iter().enumerate() {
            for (c, v) in centers[l].iter_mut().zip(self.row(x, i)) {
                *c += v;
            }
        }
        for (c, &m) in centers.iter_mut().zip(counts) {
            for v in c.iter_mut() {
                *v /= m as f64;
            }
        }
        centers
    }

    /// Maximum-likelihood covariance per cluster, eigenvalue-floored.
    fn covariances(
        &self,
        x: &[f64],
        labels: &[usize],
        counts: &[usize],
        centers: &[Vec<f64>],
    ) -> Result<Vec<SquareMatrix>> {
        let p = self.p;
        let mut acc = vec![vec![0.0; p * p]; self.k];
        let mut d = vec![0.0; p];
        for (i, &l) in labels.iter().enumerate() {
            for (dj, (v, c)) in d.iter_mut().zip(self.row(x, i).iter().zip(&centers[l])) {
                *dj = v - c;
            }
            let a = &mut acc[l];
            for r in 0..p {
                for c in r..p {
                    a[r * p + c] += d[r] * d[c];
                }
            }
        }
        acc.into_iter()
            .zip(counts)
            .map(|(mut a, &m)| {
                let m = m.max(1) as f64;
                for r in 0..p {
                    for c in r..p {
                        let v = a[r * p + c] / m;
                        a[r * p + c] = v;
                        a[c * p + r] = v;
                    }
                }
                regularize_spd(&SquareMatrix::new(p, a)?, self.floor)
            })
            .collect()
    }

    fn lloyd(&self, mut x: Vec<f64>, mut centers: Vec<Vec<f64>>, fill: bool) -> Run {
        let (n, p) = (self.n(), self.p);
        let mut trace = Vec::new();
        let mut labels = vec![0; n];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.cfg.max_iter {
            iterations += 1;
            let (l, _, counts) = self.assign(&x, |xi, c| sq_euclid(xi, &centers[c]));
            labels = l;
            centers = self.means(&x, &labels, &counts);
            if fill {
                for (i, &l) in labels.iter().enumerate() {
                    for j in 0..p {
                        if !self.ds.is_observed(i, j) {
                            x[i * p + j] = centers[l][j];
                        }
                    }
                }
            }
            let obj: f64 = (0..n)
                .map(|i| sq_euclid(self.row(&x, i), &centers[labels[i]]))
                .sum();
            trace.push(obj);
            if self.stop(&trace) || obj == 0.0 {
                converged = true;
                break;
            }
        }
        Run {
            x,
            labels,
            centers,
            covariances: None,
            trace,
            iterations,
            converged,
        }
    }

    fn kmahal(&self, x0: Vec<f64>, centers: Vec<Vec<f64>>, mode: CovarianceMode) -> Result<Run> {
        let (n, p) = (self.n(), self.p);
        // Euclidean K-means on the starting fill supplies the first partition.
        let init = self.lloyd(x0, centers, false);
        let mut x = init.x;
        let mut labels = init.labels;
        let mut counts = {
            let mut c = vec![0; self.k];
            for &l in &labels {
                c[l] += 1;
            }
            c
        };
        let covs_of =
            |x: &[f64], labels: &[usize], counts: &[usize], centers: &[Vec<f64>]| match mode {
                CovarianceMode::Estimated => self.covariances(x, labels, counts, centers),
                CovarianceMode::Identity => Ok(vec![SquareMatrix::identity(p); self.k]),
            };
        let mut centers = self.means(&x, &labels, &counts);
        let mut covs = covs_of(&x, &labels, &counts, &centers)?;

        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.cfg.max_iter {
            iterations += 1;
            // (a) assignments under the current centers and covariances. The
            // log-determinant term makes every step a descent step on the
            // classification likelihood; without it the ML covariance update
            // resets sum d^2 to n*p and the cycle has nothing to minimize.
            let factors = covs.iter().map(Cholesky::new).collect::<Result<Vec<_>>>()?;
            let log_dets: Vec<f64> = factors.iter().map(Cholesky::log_det).collect();
            let (l, _, c) = self.assign(&x, |xi, k| {
                factors[k].mahalanobis_sq(xi, &centers[k]) + log_dets[k]
            });
            labels = l;
            counts = c;
            // (b) centers and covariances of the new partition
            centers = self.means(&x, &labels, &counts);
            covs = covs_of(&x, &labels, &counts, &centers)?;
            // (c) conditional means for the missing cells
            for i in 0..n {
                if self.ds.mask_row(i).iter().all(|&m| m) {
                    continue;
                }
                let split = self.ds.split_row(i)?;
                let fill = super::conditional_mean(&split, &centers[labels[i]], &covs[labels[i]])?;
                for (&j, v) in split.missing.iter().zip(fill) {
                    x[i * p + j] = v;
                }
            }
            let factors = covs.iter().map(Cholesky::new).collect::<Result<Vec<_>>>()?;
            let obj: f64 = (0..n)
                .map(|i| {
                    let f = &factors[labels[i]];
                    f.mahalanobis_sq(self.row(&x, i), &centers[labels[i]]) + f.log_det()
                })
                .sum();
            trace.push(obj);
            if self.stop(&trace) {
                converged = true;
                break;
            }
        }
        Ok(Run {
            x,
            labels,
            centers,
            covariances: Some(covs),
            trace,
            iterations,
            converged,
        })
    }

    fn finish(&self, run: Run, restart: usize) -> Result<FitResult> {
        let assignments = Assignments::new(self.k, run.labels)?;
        let counts = assignments.counts();
        let covariances = match run.covariances {
            Some(c) => c,
            None => self.covariances(&run.x, assignments.as_slice(), &counts, &run.centers)?,
        };
        let model = ClusterModel {
            centers: run.centers,
            covariances,
            counts,
        };
        let criterion_a = criterion_a(&model)?;
        Ok(FitResult {
            algorithm: self.cfg.algorithm,
            model,
            assignments,
            completed: self.ds.completed_with(run.x)?,
            objective_trace: run.trace,
            criterion_a,
            iterations: run.iterations,
            converged: run.converged,
            restart,
        })
    }
}
