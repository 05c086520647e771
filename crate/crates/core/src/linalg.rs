//! Dense linear algebra kept deliberately small: jittered Cholesky for
//! covariance matrices and a pivoted solver for the kernel moment system.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Initial jitter relative to the largest diagonal entry.
pub const JITTER_START: f64 = 1e-12;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Four-accumulator dot product; order of summation is fixed.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in 4 * chunks..n {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn from_fn<F: FnMut(usize, usize) -> T>(n: usize, mut f: F) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_diag(&self) -> T {
        (0..self.n).fold(T::zero(), |m, i| m.max(self.get(i, i)))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(<[T]>::to_vec).collect()
    }

    /// Smallest eigenvalue, computed in `f64`. Used for diagnostics only.
    pub fn smallest_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        let m = nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).to_f64_lossy());
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Lower-triangular Cholesky factor in packed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor<T> {
    n: usize,
    packed: Vec<T>,
    jitter: T,
}

impl<T: Scalar> LowerFactor<T> {
    #[inline]
    fn row(&self, i: usize) -> &[T] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Jitter actually added to the diagonal.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.row(i)[j]
        }
    }

    /// Computes `L z`.
    pub fn mul_vec(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.n, "dimension mismatch");
        (0..self.n).map(|i| dot(self.row(i), &z[..=i])).collect()
    }

    /// Max-norm of `L Lᵀ − M`.
    pub fn reconstruction_error(&self, m: &SymMatrix<T>) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], self.row(j));
                worst = worst.max((v - m.get(i, j)).abs());
            }
        }
        worst
    }

    fn try_factor(m: &SymMatrix<T>, jitter: T) -> Option<Self> {
        let n = m.dim();
        let mut packed = vec![T::zero(); n * (n + 1) / 2];
        for i in 0..n {
            let ri = i * (i + 1) / 2;
            for j in 0..=i {
                let rj = j * (j + 1) / 2;
                let s = dot(&packed[ri..ri + j], &packed[rj..rj + j]);
                if i == j {
                    let d = m.get(i, i) + jitter - s;
                    if !(d > T::zero()) || !d.is_finite() {
                        return None;
                    }
                    packed[ri + i] = d.sqrt();
                } else {
                    packed[ri + j] = (m.get(i, j) - s) / packed[rj + j];
                }
            }
        }
        Some(Self { n, packed, jitter })
    }

    /// Cholesky factorization with a geometric jitter ladder
    /// `λ = 1e-12·max(diag), ×10, ..., 1e-6·max(diag)`.
    pub fn factor_with_jitter(m: &SymMatrix<T>) -> Result<Self> {
        let scale = m.max_diag();
        if !(scale > T::zero()) {
            return Err(Error::Factorization {
                jitter: 0.0,
                min_eigenvalue: m.smallest_eigenvalue(),
            });
        }
        let mut rel = JITTER_START;
        loop {
            let jitter = scale * T::lit(rel);
            if let Some(f) = Self::try_factor(m, jitter) {
                return Ok(f);
            }
            if rel >= JITTER_MAX * (1.0 - 1e-9) {
                return Err(Error::Factorization {
                    jitter: jitter.to_f64_lossy(),
                    min_eigenvalue: m.smallest_eigenvalue(),
                });
            }
            rel *= 10.0;
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major `n × n`. Returns `None` for a singular system.
pub fn solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col] == T::zero() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == T::zero() {
                continue;
            }
            let (upper, lower) = m.split_at_mut(r);
            for (x, &v) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x = *x - f * v;
            }
            rhs[r] = rhs[r] - f * rhs[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(rhs[i], |acc, j| acc - m[i][j] * x[j]);
        x[i] = s / m[i][i];
    }
    Some(x)
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`, infinite when singular.
pub fn condition_number_1<T: Scalar>(a: &[Vec<T>]) -> f64 {
    let n = a.len();
    let norm1 = |cols: &dyn Fn(usize, usize) -> f64| {
        (0..n)
            .map(|j| (0..n).map(|i| cols(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let a_norm = norm1(&|i, j| a[i][j].to_f64_lossy());
    let mut inv = vec![vec![0.0; n]; n];
    let a64: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        match solve(&a64, &e) {
            Some(col) => {
                for i in 0..n {
                    inv[i][j] = col[i];
                }
            }
            None => return f64::INFINITY,
        }
    }
    a_norm * norm1(&|i, j| inv[i][j])
}
