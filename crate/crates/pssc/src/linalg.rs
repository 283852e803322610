//! Dense row-major matrices, seeded randomness, and the factorizations
//! (Jacobi SVD, symmetric eigendecomposition) the rest of the crate builds on.
//!
//! Everything is `f64`; the gradient checks elsewhere in the crate rely on it.

use crate::error::{PsscError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Mat {
        assert_eq!(rows * cols, data.len(), "shape does not match data length");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Plain triple-loop multiply in i-k-j order so the inner loop streams
    /// over contiguous rows of both the output and `rhs`.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Mat::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    out_row[j] += a * rhs_row[j];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Frobenius inner product ⟨A, B⟩ = Σ_ij A_ij B_ij.
    pub fn dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// Deterministic generator: the same seed produces the same value stream on
/// every platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> SeededRng {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent generator for a named stage; splitting is a pure
    /// function of (seed, tag), so pipelines stay reproducible stage by stage.
    pub fn split(&self, tag: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(tag.wrapping_add(1))))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// `m` distinct indices drawn uniformly from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, m: usize) -> Vec<usize> {
        assert!(m <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let j = i + self.index(n - i);
            pool.swap(i, j);
            out.push(pool[i]);
        }
        out
    }
}

/// Row-wise softmax with max-subtraction for overflow safety.
pub fn softmax_rows(m: &Mat) -> Mat {
    let mut out = Mat::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        let mx = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for j in 0..m.cols() {
            let e = (row[j] - mx).exp();
            out.set(i, j, e);
            sum += e;
        }
        for j in 0..m.cols() {
            out.set(i, j, out.get(i, j) / sum);
        }
    }
    out
}

fn col_dot(a: &Mat, p: usize, q: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows() {
        s += a.get(i, p) * a.get(i, q);
    }
    s
}

fn rotate_cols(a: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..a.rows() {
        let ap = a.get(i, p);
        let aq = a.get(i, q);
        a.set(i, p, c * ap - s * aq);
        a.set(i, q, s * ap + c * aq);
    }
}

/// Singular value decomposition M = U·diag(σ)·Vᵀ via one-sided Jacobi with a
/// deterministic cyclic sweep order. σ is non-increasing; U (rows×min) and
/// V (cols×min) have orthonormal columns.
pub fn svd(m: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    if !m.is_finite() {
        return Err(PsscError::contract("svd: input has non-finite entries"));
    }
    if m.rows() >= m.cols() {
        svd_tall(m)
    } else {
        let (u, sigma, v) = svd_tall(&m.transpose())?;
        Ok((v, sigma, u))
    }
}

fn svd_tall(a: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    let n = a.cols();
    let mut u = a.clone();
    let mut v = Mat::identity(n);
    let sweep_cap = 100 * a.rows().max(n).max(1);
    let tol = 1e-14;

    let mut converged = false;
    for _ in 0..sweep_cap {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let app = col_dot(&u, p, p);
                let aqq = col_dot(&u, q, q);
                let apq = col_dot(&u, p, q);
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_cols(&mut u, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PsscError::Factorization(format!(
            "one-sided Jacobi SVD did not converge within {sweep_cap} sweeps"
        )));
    }

    let mut sigma: Vec<f64> = (0..n).map(|j| col_dot(&u, j, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));

    let mut u_out = Mat::zeros(a.rows(), n);
    let mut v_out = Mat::zeros(n, n);
    let mut sig_out = Vec::with_capacity(n);
    let max_sigma = order.first().map(|&j| sigma[j]).unwrap_or(0.0);
    for (dst, &src) in order.iter().enumerate() {
        sig_out.push(sigma[src]);
        for i in 0..n {
            v_out.set(i, dst, v.get(i, src));
        }
        if sigma[src] > max_sigma * 1e-300 && sigma[src] > 0.0 {
            for i in 0..a.rows() {
                u_out.set(i, dst, u.get(i, src) / sigma[src]);
            }
        }
    }
    sigma = sig_out;
    complete_zero_columns(&mut u_out);
    Ok((u_out, sigma, v_out))
}

// Replace zero columns (null singular directions) with orthonormal fill so U
// keeps orthonormal columns even for rank-deficient input.
fn complete_zero_columns(u: &mut Mat) {
    let (rows, cols) = (u.rows(), u.cols());
    for j in 0..cols {
        let norm = col_dot(u, j, j).sqrt();
        if norm > 0.5 {
            continue;
        }
        'candidates: for cand in 0..rows {
            let mut col = vec![0.0; rows];
            col[cand] = 1.0;
            for jj in 0..cols {
                if jj == j {
                    continue;
                }
                let proj: f64 = (0..rows).map(|i| col[i] * u.get(i, jj)).sum();
                for (i, c) in col.iter_mut().enumerate() {
                    *c -= proj * u.get(i, jj);
                }
            }
            let nn = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nn > 0.5 {
                for (i, c) in col.iter().enumerate() {
                    u.set(i, j, c / nn);
                }
                break 'candidates;
            }
        }
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues come
/// back ascending with matching orthonormal eigenvector columns.
pub fn eigh_sym(m: &Mat) -> Result<(Vec<f64>, Mat)> {
    if !m.is_square() {
        return Err(PsscError::contract("eigh_sym: matrix must be square"));
    }
    let n = m.rows();
    let scale = m.max_abs().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-10 * scale {
                return Err(PsscError::contract(format!(
                    "eigh_sym: input asymmetric at ({i},{j})"
                )));
            }
        }
    }

    let mut a = m.clone();
    // Symmetrize exactly so fp dust in the input cannot break convergence.
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, avg);
            a.set(j, i, avg);
        }
    }
    let mut v = Mat::identity(n);
    let sweep_cap = 100 * n.max(1);
    let tol = 1e-14 * scale;

    let mut converged = false;
    for _ in 0..sweep_cap {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol {
                    continue;
                }
                rotated = true;
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                let app = a.get(p, p);
                let aqq = a.get(q, q);
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(p, i, c * aip - s * aiq);
                    a.set(i, q, s * aip + c * aiq);
                    a.set(q, i, s * aip + c * aiq);
                }
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PsscError::Factorization(format!(
            "Jacobi eigendecomposition did not converge within {sweep_cap} sweeps"
        )));
    }

    let mut vals: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap().then(i.cmp(&j)));
    let mut v_out = Mat::zeros(n, n);
    let mut vals_out = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vals_out.push(vals[src]);
        for i in 0..n {
            v_out.set(i, dst, v.get(i, src));
        }
    }
    vals = vals_out;
    Ok((vals, v_out))
}
