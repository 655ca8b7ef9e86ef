//! Dense kernels for small symmetric positive-definite matrices.
//!
//! Covariance matrices in this crate are at most a few dozen rows wide, so a
//! cyclic Jacobi eigensolver and a plain Cholesky factorization are accurate
//! and fast enough. Inverses are never formed explicitly: solves, log
//! determinants and quadratic forms all go through a [`Cholesky`] factor.

use crate::error::{Error, Result};

/// Relative tolerance of the symmetry check, `|a_ij - a_ji| <= tol * max(1, |a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense square matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} entries given for a {dim}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "row of length {} in a {dim}-row matrix",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mean_diagonal(&self) -> f64 {
        self.trace() / self.dim as f64
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The submatrix with the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// Checks `|a_ij - a_ji| <= SYMMETRY_TOL * max(1, |a_ij|)` for every pair.
    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                let (a, b) = (self.get(i, j), self.get(j, i));
                let gap = (a - b).abs();
                if !(gap <= SYMMETRY_TOL * a.abs().max(1.0)) {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        gap,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: SquareMatrix,
}

impl SymEigen {
    /// `V diag(values) V^T`, symmetrized exactly.
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| v.get(i, k) * self.values[k] * v.get(j, k))
                    .sum();
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

/// Cyclic Jacobi eigen-decomposition.
pub fn sym_eigen(m: &SquareMatrix) -> Result<SymEigen> {
    m.check_symmetric()?;
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = SquareMatrix::identity(n).data;
    let idx = |r: usize, c: usize| r * n + c;

    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[idx(i, i)] * a[idx(i, i)];
            for j in i + 1..n {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off == 0.0 || off <= (f64::EPSILON * f64::EPSILON) * diag * 1e-4 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[idx(k, p)], a[idx(k, q)]);
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[idx(p, k)], a[idx(q, k)]);
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[idx(k, p)], v[idx(k, q)]);
                    v[idx(k, p)] = c * vkp - s * vkq;
                    v[idx(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[idx(y, y)].total_cmp(&a[idx(x, x)]));
    let values = order.iter().map(|&k| a[idx(k, k)]).collect();
    let mut vectors = SquareMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v[idx(row, k)]);
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn sym_eigenvalues(m: &SquareMatrix) -> Result<Vec<f64>> {
    sym_eigen(m).map(|e| e.values)
}

/// Lower-triangular Cholesky factor `L` with `m = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn new(m: &SquareMatrix) -> Result<Self> {
        m.check_symmetric()?;
        Self::from_row_major(m.dim(), m.as_slice())
    }

    /// Factors a symmetric matrix given as row-major entries. Only the lower
    /// triangle is read and symmetry is not checked.
    pub fn from_row_major(dim: usize, a: &[f64]) -> Result<Self> {
        debug_assert_eq!(a.len(), dim * dim);
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut d = a[j * dim + j];
            for k in 0..j {
                d -= l[j * dim + k] * l[j * dim + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[j * dim + j] = djj;
            for i in j + 1..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = s / djj;
            }
        }
        Ok(Self { dim, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(row, col)` of `L`.
    pub fn factor(&self, row: usize, col: usize) -> f64 {
        self.lower[row * self.dim + col]
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
    }

    /// `L z`, mapping standard normal draws to draws with covariance `m`.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.lower_mul_into(z, &mut out);
        out
    }

    /// `L z` written into `out`.
    pub fn lower_mul_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..=i).map(|k| self.lower[i * n + k] * z[k]).sum();
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum::<f64>()
    }

    /// `d^T m^{-1} d`, via one forward substitution.
    pub fn quadratic_form(&self, d: &[f64]) -> f64 {
        self.distance_sq(d, None)
    }

    /// `(x - mu)^T m^{-1} (x - mu)` without materializing the difference.
    pub fn mahalanobis_sq(&self, x: &[f64], mu: &[f64]) -> f64 {
        self.distance_sq(x, Some(mu))
    }

    fn distance_sq(&self, d: &[f64], shift: Option<&[f64]>) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        let mut y = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if n <= 16 {
            &mut y[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for i in 0..n {
            let mut s = match shift {
                Some(mu) => d[i] - mu[i],
                None => d[i],
            };
            for k in 0..i {
                s -= self.lower[i * n + k] * y[k];
            }
            let yi = s / self.lower[i * n + i];
            y[i] = yi;
            acc += yi * yi;
        }
        acc
    }
}

/// Solves `m x = b` for symmetric positive-definite `m`.
pub fn spd_solve(m: &SquareMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.dim() {
        return Err(Error::Shape(format!(
            "right-hand side of length {} for a {}x{} system",
            b.len(),
            m.dim(),
            m.dim()
        )));
    }
    Ok(Cholesky::new(m)?.solve(b))
}

/// Natural log of the determinant of a symmetric positive-definite matrix.
pub fn log_det(m: &SquareMatrix) -> Result<f64> {
    Ok(Cholesky::new(m)?.log_det())
}

/// Raises every eigenvalue below `floor` to `floor`, keeping eigenvectors.
///
/// Returns `m` unchanged (bit for bit) when its spectrum is already at or
/// above the floor.
pub fn regularize_spd(m: &SquareMatrix, floor: f64) -> Result<SquareMatrix> {
    let mut eig = sym_eigen(m)?;
    if eig.values.iter().all(|&v| v >= floor) {
        return Ok(m.clone());
    }
    for v in &mut eig.values {
        *v = v.max(floor);
    }
    Ok(eig.reconstruct())
}
