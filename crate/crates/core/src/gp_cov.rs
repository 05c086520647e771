//! Covariance models for centered Gaussian drivers and exact sampling of
//! their finite-dimensional laws on a uniform grid.
//!
//! Paths are drawn as `L z` where `L` is the (jittered) Cholesky factor of
//! the covariance over the non-zero grid nodes and `z` is a vector of
//! standard normals from a ChaCha stream keyed by the seed.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LowerFactor, SymMatrix};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    FractionalBm,
    SubFractionalBm,
    BifractionalBm,
    Custom,
}

pub type CustomCovariance<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Law of a centered Gaussian driver, identified by its covariance `R(s, t)`.
#[derive(Clone)]
pub struct CovarianceModel<T> {
    kind: CovarianceKind,
    hurst: T,
    bi_exponent: T,
    custom: Option<CustomCovariance<T>>,
}

impl<T: fmt::Debug> fmt::Debug for CovarianceModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovarianceModel")
            .field("kind", &self.kind)
            .field("hurst", &self.hurst)
            .field("bi_exponent", &self.bi_exponent)
            .field("custom", &self.custom.is_some())
            .finish()
    }
}

fn check_hurst<T: Scalar>(h: T) -> Result<()> {
    if h > T::zero() && h < T::one() {
        Ok(())
    } else {
        Err(Error::domain("model.hurst", "(0,1)", h.to_f64_lossy()))
    }
}

impl<T: Scalar> CovarianceModel<T> {
    pub fn fractional(hurst: T) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self {
            kind: CovarianceKind::FractionalBm,
            hurst,
            bi_exponent: T::one(),
            custom: None,
        })
    }

    pub fn sub_fractional(hurst: T) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self {
            kind: CovarianceKind::SubFractionalBm,
            hurst,
            bi_exponent: T::one(),
            custom: None,
        })
    }

    pub fn bifractional(hurst: T, bi_exponent: T) -> Result<Self> {
        check_hurst(hurst)?;
        if !(bi_exponent > T::zero() && bi_exponent <= T::one()) {
            return Err(Error::domain("model.bi_exponent", "(0,1]", bi_exponent.to_f64_lossy()));
        }
        Ok(Self {
            kind: CovarianceKind::BifractionalBm,
            hurst,
            bi_exponent,
            custom: None,
        })
    }

    /// User-supplied covariance. Positive semidefiniteness is checked when a
    /// sampler is built, never assumed.
    pub fn custom<F>(eval: F) -> Self
    where
        F: Fn(T, T) -> T + Send + Sync + 'static,
    {
        Self {
            kind: CovarianceKind::Custom,
            hurst: T::lit(0.5),
            bi_exponent: T::one(),
            custom: Some(Arc::new(eval)),
        }
    }

    /// Builds a built-in model from its kind and parameters.
    pub fn from_kind(kind: CovarianceKind, hurst: T, bi_exponent: T) -> Result<Self> {
        match kind {
            CovarianceKind::FractionalBm => Self::fractional(hurst),
            CovarianceKind::SubFractionalBm => Self::sub_fractional(hurst),
            CovarianceKind::BifractionalBm => Self::bifractional(hurst, bi_exponent),
            CovarianceKind::Custom => Err(Error::Config(
                "custom covariance models need an evaluator".into(),
            )),
        }
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn hurst(&self) -> T {
        self.hurst
    }

    pub fn bi_exponent(&self) -> T {
        self.bi_exponent
    }

    /// `R(s, t)` without argument validation.
    pub fn covariance(&self, s: T, t: T) -> T {
        let two = T::lit(2.0);
        let h2 = two * self.hurst;
        let half = T::lit(0.5);
        if self.kind != CovarianceKind::Custom && (s == T::zero() || t == T::zero()) {
            return T::zero();
        }
        match self.kind {
            CovarianceKind::FractionalBm => half * (s.powf(h2) + t.powf(h2) - (s - t).abs().powf(h2)),
            CovarianceKind::SubFractionalBm => {
                s.powf(h2) + t.powf(h2) - half * ((s + t).powf(h2) + (s - t).abs().powf(h2))
            }
            CovarianceKind::BifractionalBm => {
                let k = self.bi_exponent;
                two.powf(-k) * ((s.powf(h2) + t.powf(h2)).powf(k) - (s - t).abs().powf(h2 * k))
            }
            CovarianceKind::Custom => (self.custom.as_ref().expect("custom evaluator"))(s, t),
        }
    }
}

/// `R(s, t)` with argument checks.
pub fn covariance_at<T: Scalar>(model: &CovarianceModel<T>, s: T, t: T) -> Result<T> {
    if s < T::zero() || !s.is_finite() {
        return Err(Error::domain("s", "[0,inf)", s.to_f64_lossy()));
    }
    if t < T::zero() || !t.is_finite() {
        return Err(Error::domain("t", "[0,inf)", t.to_f64_lossy()));
    }
    Ok(model.covariance(s, t))
}

/// Uniform grid `t_i = i T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    horizon: T,
    n_steps: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(horizon: T, n_steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::domain("sde.T", "(0,inf)", horizon.to_f64_lossy()));
        }
        if n_steps < 2 {
            return Err(Error::domain("sde.n_steps", "[2,inf)", n_steps as f64));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n_steps)
    }

    #[inline]
    pub fn node(&self, i: usize) -> T {
        self.horizon * T::from_usize_lossy(i) / T::from_usize_lossy(self.n_steps)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }
}

/// One realization of the driver on a grid; `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
    pub seed: u64,
}

/// `R(t_i, t_j)` for `i, j ≥ 1`.
pub fn covariance_matrix<T: Scalar>(model: &CovarianceModel<T>, grid: &GridSpec<T>) -> Result<SymMatrix<T>> {
    let n = grid.n_steps();
    let m = SymMatrix::from_fn(n, |i, j| model.covariance(grid.node(i + 1), grid.node(j + 1)));
    if model.kind() == CovarianceKind::Custom {
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (grid.node(i + 1), grid.node(j + 1));
                let (rab, rba) = (model.covariance(a, b), model.covariance(b, a));
                let tol = T::lit(1e-12) * (T::one() + rab.abs().max(rba.abs()));
                if !rab.is_finite() || (rab - rba).abs() > tol {
                    return Err(Error::Config(format!(
                        "custom covariance is not symmetric at ({a}, {b}): {rab} vs {rba}"
                    )));
                }
            }
        }
    }
    Ok(m)
}

/// Cached factorization for repeated sampling on one `(model, grid)` pair.
#[derive(Debug, Clone)]
pub struct GaussianSampler<T> {
    grid: GridSpec<T>,
    factor: LowerFactor<T>,
}

impl<T: Scalar> GaussianSampler<T> {
    pub fn new(model: &CovarianceModel<T>, grid: &GridSpec<T>) -> Result<Self> {
        let m = covariance_matrix(model, grid)?;
        let factor = LowerFactor::factor_with_jitter(&m)?;
        Ok(Self { grid: *grid, factor })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn factor(&self) -> &LowerFactor<T> {
        &self.factor
    }

    pub fn sample(&self, seed: u64) -> GaussianPath<T> {
        let mut rng = rng_from_seed(seed);
        let z: Vec<T> = (0..self.grid.n_steps())
            .map(|_| T::lit(StandardNormal.sample(&mut rng)))
            .collect();
        let mut values = Vec::with_capacity(self.grid.n_steps() + 1);
        values.push(T::zero());
        values.extend(self.factor.mul_vec(&z));
        GaussianPath {
            grid: self.grid,
            values,
            seed,
        }
    }
}

pub fn sample_path<T: Scalar>(model: &CovarianceModel<T>, grid: &GridSpec<T>, seed: u64) -> Result<GaussianPath<T>> {
    Ok(GaussianSampler::new(model, grid)?.sample(seed))
}

/// Monte Carlo estimate of `E[max_i |G(t_i)|]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupAbsEstimate<T> {
    pub mean: T,
    /// `None` when only one replication was drawn.
    pub std_error: Option<T>,
}

pub fn estimate_sup_abs<T: Scalar>(
    model: &CovarianceModel<T>,
    grid: &GridSpec<T>,
    n_reps: usize,
    seed: u64,
) -> Result<SupAbsEstimate<T>> {
    if n_reps == 0 {
        return Err(Error::domain("n_reps", "[1,inf)", 0.0));
    }
    let sampler = GaussianSampler::new(model, grid)?;
    let sups: Vec<T> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let path = sampler.sample(derive_seed(seed, &[rep as u64]));
            path.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
        })
        .collect();
    let (mean, se) = mean_and_se(&sups);
    Ok(SupAbsEstimate { mean, std_error: se })
}

pub(crate) fn mean_and_se<T: Scalar>(xs: &[T]) -> (T, Option<T>) {
    let n = T::from_usize_lossy(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one());
    (mean, Some((var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn brownian_case_reduces_to_min() {
        let m = CovarianceModel::fractional(0.5).unwrap();
        assert_abs_diff_eq!(covariance_at(&m, 1.0, 2.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fbm_h075_closed_form() {
        // ½(1 + 2^{1.5} − 1) = √2
        let m = CovarianceModel::fractional(0.75).unwrap();
        assert_abs_diff_eq!(covariance_at(&m, 1.0, 2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn zero_time_gives_zero_covariance() {
        let models = [
            CovarianceModel::fractional(0.3).unwrap(),
            CovarianceModel::sub_fractional(0.6).unwrap(),
            CovarianceModel::bifractional(0.7, 0.8).unwrap(),
        ];
        for m in &models {
            for t in [0.0, 0.3, 1.7] {
                assert_eq!(covariance_at(m, 0.0, t).unwrap(), 0.0, "{m:?} t={t}");
            }
        }
    }

    #[test]
    fn parameter_checks() {
        assert!(matches!(
            CovarianceModel::<f64>::fractional(1.5),
            Err(Error::Domain { name: "model.hurst", .. })
        ));
        assert!(CovarianceModel::<f64>::fractional(0.0).is_err());
        assert!(CovarianceModel::<f64>::bifractional(0.5, 0.0).is_err());
        assert!(CovarianceModel::<f64>::bifractional(0.5, 1.0).is_ok());
        let m = CovarianceModel::fractional(0.5).unwrap();
        assert!(covariance_at(&m, -0.1, 1.0).is_err());
        assert!(GridSpec::new(1.0, 1).is_err());
        assert!(GridSpec::new(0.0, 10).is_err());
    }

    #[test]
    fn brownian_matrix_on_three_nodes() {
        let m = CovarianceModel::fractional(0.5).unwrap();
        let grid = GridSpec::new(1.0, 2).unwrap();
        let cov = covariance_matrix(&m, &grid).unwrap();
        assert_eq!(cov.rows(), vec![vec![0.5, 0.5], vec![0.5, 1.0]]);
    }

    #[test]
    fn subfractional_matrix_matches_entrywise_oracle() {
        // Oracle: direct transcription of s^{2H}+t^{2H}−½[(s+t)^{2H}+|s−t|^{2H}].
        let h: f64 = 0.6;
        let oracle = |s: f64, t: f64| {
            s.powf(2.0 * h) + t.powf(2.0 * h) - 0.5 * ((s + t).powf(2.0 * h) + (s - t).abs().powf(2.0 * h))
        };
        let m = CovarianceModel::sub_fractional(h).unwrap();
        let grid = GridSpec::new(1.0, 3).unwrap();
        let cov = covariance_matrix(&m, &grid).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (s, t) = ((i + 1) as f64 / 3.0, (j + 1) as f64 / 3.0);
                assert_abs_diff_eq!(cov.get(i, j), oracle(s, t), epsilon = 1e-14);
            }
        }
        assert!(cov.is_symmetric());
    }

    #[test]
    fn invalid_custom_covariance_is_rejected() {
        let m = CovarianceModel::custom(|s: f64, t: f64| -(s * t));
        let grid = GridSpec::new(1.0, 4).unwrap();
        assert!(matches!(GaussianSampler::new(&m, &grid), Err(Error::Factorization { .. })));
        let asym = CovarianceModel::custom(|s: f64, t: f64| s.min(t) + 0.01 * s);
        assert!(matches!(covariance_matrix(&asym, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn custom_brownian_matches_builtin() {
        let custom = CovarianceModel::custom(|s: f64, t: f64| s.min(t));
        let builtin = CovarianceModel::fractional(0.5).unwrap();
        let grid = GridSpec::new(1.0, 16).unwrap();
        let a = sample_path(&custom, &grid, 3).unwrap();
        let b = sample_path(&builtin, &grid, 3).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = CovarianceModel::sub_fractional(0.4).unwrap();
        let grid = GridSpec::new(1.0, 64).unwrap();
        let a = sample_path(&m, &grid, 99).unwrap();
        let b = sample_path(&m, &grid, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.values.len(), 65);
        assert_ne!(a.values, sample_path(&m, &grid, 100).unwrap().values);
    }

    #[test]
    fn f32_sampling_works() {
        let m = CovarianceModel::<f32>::fractional(0.7).unwrap();
        let grid = GridSpec::new(1.0f32, 32).unwrap();
        let p = sample_path(&m, &grid, 5).unwrap();
        assert!(p.values.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(covariance_at(&m, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sup_abs_single_replication_has_no_std_error() {
        let m = CovarianceModel::fractional(0.5).unwrap();
        let grid = GridSpec::new(1.0, 8).unwrap();
        let est = estimate_sup_abs(&m, &grid, 1, 11).unwrap();
        let path = GaussianSampler::new(&m, &grid).unwrap().sample(derive_seed(11, &[0]));
        let sup = path.values.iter().fold(0.0f64, |a, v: &f64| a.max(v.abs()));
        assert_eq!(est.mean, sup);
        assert!(est.std_error.is_none());
        assert!(estimate_sup_abs(&m, &grid, 0, 1).is_err());
    }
}
