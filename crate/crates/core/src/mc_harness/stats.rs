//! Sample statistics used by the experiment gates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// A Monte Carlo mean with its standard error (absent for one sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, se) = crate::gp_cov::mean_and_se(xs);
        Self { mean, se }
    }

    pub fn se_or_zero(&self) -> f64 {
        self.se.unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            se: self.se.map(|s| s * factor.abs()),
        }
    }
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

fn central_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Moment coefficient of skewness `m3 / m2^{3/2}`.
pub fn skewness(xs: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(xs);
    m3 / m2.powf(1.5)
}

/// `m4 / m2² − 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(xs);
    m4 / (m2 * m2) - 3.0
}

/// Kolmogorov distance between the empirical CDF and `N(mean, variance)`.
pub fn ecdf_distance_normal(xs: &[f64], mean: f64, variance: f64) -> f64 {
    let Ok(normal) = Normal::new(mean, variance.sqrt()) else {
        return f64::NAN;
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}
