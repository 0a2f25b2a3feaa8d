//! Dense vector/matrix arithmetic, spectral-norm estimation, and seeded
//! random generation shared by the other modules.
//!
//! Everything is plain `f64` with a fixed summation order, so a given build
//! reproduces its results bit for bit. The random generator wraps ChaCha12,
//! a counter-based stream cipher: one `u64` seed fully determines the stream.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Dense vector of `f64` with fixed length (at least 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec64(Vec<f64>);

impl Vec64 {
    pub fn new(elements: Vec<f64>) -> Self {
        assert!(!elements.is_empty(), "Vec64 must have length >= 1");
        Vec64(elements)
    }

    pub fn zeros(n: usize) -> Self {
        Vec64::new(vec![0.0; n])
    }

    /// All entries set to `value`.
    pub fn filled(n: usize, value: f64) -> Self {
        Vec64::new(vec![value; n])
    }

    pub fn from_slice(elements: &[f64]) -> Self {
        Vec64::new(elements.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vec64) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn add(&self, other: &Vec64) -> Vec64 {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        Vec64::new(self.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vec64) -> Vec64 {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        Vec64::new(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> Vec64 {
        Vec64::new(self.iter().map(|a| c * a).collect())
    }

    pub fn scale_inplace(&mut self, c: f64) {
        for v in &mut self.0 {
            *v *= c;
        }
    }

    /// `self += c * other`, element-wise.
    pub fn add_scaled_inplace(&mut self, other: &Vec64, c: f64) {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        for (a, b) in self.0.iter_mut().zip(other.iter()) {
            *a += c * b;
        }
    }

    /// Largest absolute difference between two equal-length vectors.
    pub fn max_abs_diff(&self, other: &Vec64) -> f64 {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for Vec64 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec64 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for Vec64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Dot product in fixed index order.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(
            data.len(),
            rows * cols,
            "element count must equal rows*cols"
        );
        Mat64 { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat64::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat64::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Mat64::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix-vector product, rows accumulated in index order.
    pub fn matvec(&self, x: &Vec64) -> Vec64 {
        assert_eq!(
            self.cols,
            x.len(),
            "matvec dimension mismatch: {}x{} * {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            out.push(dot(self.row(i), x.as_slice()));
        }
        Vec64::new(out)
    }

    /// Transposed matrix-vector product `A^T x`.
    pub fn matvec_t(&self, x: &Vec64) -> Vec64 {
        assert_eq!(self.rows, x.len(), "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (j, a) in self.row(i).iter().enumerate() {
                out[j] += a * xi;
            }
        }
        Vec64::new(out)
    }

    pub fn scale(&self, c: f64) -> Mat64 {
        Mat64::new(
            self.rows,
            self.cols,
            self.data.iter().map(|v| c * v).collect(),
        )
    }

    pub fn sub(&self, other: &Mat64) -> Mat64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Mat64::new(self.rows, self.cols, data)
    }

    /// Rank-one product `u v^T`.
    pub fn outer(u: &Vec64, v: &Vec64) -> Mat64 {
        let mut m = Mat64::zeros(u.len(), v.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    }

    pub fn scale_inplace(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// `self += c * other`, element-wise.
    pub fn add_scaled_inplace(&mut self, other: &Mat64, c: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Mat64 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat64 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Power-iteration estimate of the largest singular value.
#[derive(Clone, Copy, Debug)]
pub struct SpectralNorm {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Estimates `||A||_2` by power iteration on `A^T A`, starting from the
/// normalized all-ones vector. A zero matrix reports 0 exactly.
pub fn spectral_norm(a: &Mat64, iters: usize, tol: f64) -> SpectralNorm {
    assert!(a.is_square(), "spectral_norm expects a square matrix");
    assert!(iters >= 1);
    let n = a.rows();
    let mut v = Vec64::filled(n, 1.0 / (n as f64).sqrt());
    let mut sigma = 0.0;
    for k in 0..iters {
        let av = a.matvec(&v);
        let next = av.norm2();
        if next == 0.0 {
            return SpectralNorm {
                value: 0.0,
                converged: true,
                iterations: k + 1,
            };
        }
        let w = a.matvec_t(&av);
        let wnorm = w.norm2();
        if wnorm == 0.0 {
            return SpectralNorm {
                value: next,
                converged: true,
                iterations: k + 1,
            };
        }
        v = w.scale(1.0 / wnorm);
        if k > 0 && (next - sigma).abs() <= tol * next.max(f64::MIN_POSITIVE) {
            return SpectralNorm {
                value: next,
                converged: true,
                iterations: k + 1,
            };
        }
        sigma = next;
    }
    SpectralNorm {
        value: sigma,
        converged: false,
        iterations: iters,
    }
}

/// Defaults used when callers do not care about the power-iteration budget.
pub const SPECTRAL_ITERS: usize = 10_000;
pub const SPECTRAL_TOL: f64 = 1e-13;

/// Deterministic random generator: one seed, one stream.
///
/// Backed by ChaCha12. The generator is single-owner mutable state; clone it
/// if two call paths must not interleave draws.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream for a sub-task, keyed by `stream`.
    pub fn derive(&self, stream: u64) -> Rng {
        Rng::new(
            self.seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(stream),
        )
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.random_range(lo..hi)
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn uniform_vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec64 {
        Vec64::new((0..n).map(|_| self.uniform(lo, hi)).collect())
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec64 {
        Vec64::new((0..n).map(|_| self.normal()).collect())
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }
}

/// Random symmetric positive-definite matrix `B^T B + 0.1 I` with Gaussian `B`.
pub fn random_spd(n: usize, rng: &mut Rng) -> Mat64 {
    assert!(n >= 1);
    let b = Mat64::new(n, n, (0..n * n).map(|_| rng.normal()).collect());
    let mut m = Mat64::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += b[(k, i)] * b[(k, j)];
            }
            m[(i, j)] = acc;
        }
    }
    for i in 0..n {
        m[(i, i)] += 0.1;
    }
    m
}
