//! The time-varying multiplier in the drift, with analytic derivatives.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

pub type CustomTrend<T> = Arc<dyn Fn(usize, T) -> T + Send + Sync>;

/// Parametric families with closed-form derivatives of every order.
#[derive(Clone)]
pub enum TrendFamily<T> {
    Constant { value: T },
    Affine { intercept: T, slope: T },
    /// `offset + amplitude · sin(2π·frequency·t + phase)`.
    Sine { offset: T, amplitude: T, frequency: T, phase: T },
    /// `Σ coefficients[i] · t^i`.
    Polynomial { coefficients: Vec<T> },
    /// `base + height / (1 + exp(−rate (t − midpoint)))`.
    Logistic { base: T, height: T, rate: T, midpoint: T },
    /// `(order, t) ↦ θ^{(order)}(t)`.
    Custom(CustomTrend<T>),
}

impl<T: fmt::Debug> fmt::Debug for TrendFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { value } => write!(f, "Constant({value:?})"),
            Self::Affine { intercept, slope } => write!(f, "Affine({intercept:?} + {slope:?} t)"),
            Self::Sine { offset, amplitude, frequency, phase } => {
                write!(f, "Sine({offset:?} + {amplitude:?} sin(2π {frequency:?} t + {phase:?}))")
            }
            Self::Polynomial { coefficients } => write!(f, "Polynomial({coefficients:?})"),
            Self::Logistic { base, height, rate, midpoint } => {
                write!(f, "Logistic({base:?}, {height:?}, {rate:?}, {midpoint:?})")
            }
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Declared smoothness class of the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum Smoothness<T> {
    /// Bounded only.
    Theta0,
    /// `k` derivatives, `k`-th derivative Lipschitz with constant `lipschitz`.
    ThetaK { k: usize, lipschitz: T },
    /// `k` derivatives, `k`-th derivative Hölder of order `gamma`.
    ThetaRho { k: usize, gamma: T, holder: T },
}

impl<T: Scalar> Smoothness<T> {
    /// Effective smoothness index `ρ`. A Lipschitz `k`-th derivative counts as `k + 1`.
    pub fn rho(&self) -> T {
        match *self {
            Smoothness::Theta0 => T::zero(),
            Smoothness::ThetaK { k, .. } => T::from_usize_lossy(k + 1),
            Smoothness::ThetaRho { k, gamma, .. } => T::from_usize_lossy(k) + gamma,
        }
    }
}

/// `σ^{(j)}` as a polynomial in `σ`, lowest degree first.
fn sigmoid_derivative_poly(order: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..order {
        // p ↦ p′(s)·(s − s²)
        let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (i, c) in dp.iter().enumerate() {
            next[i + 1] += c;
            next[i + 2] -= c;
        }
        p = next;
    }
    p
}

#[derive(Debug, Clone)]
pub struct TrendFunction<T> {
    family: TrendFamily<T>,
    bound_l: T,
    smoothness: Smoothness<T>,
}

impl<T: Scalar> TrendFunction<T> {
    pub fn new(family: TrendFamily<T>, bound_l: T, smoothness: Smoothness<T>) -> Result<Self> {
        if !(bound_l > T::zero()) || !bound_l.is_finite() {
            return Err(Error::domain("trend.bound_L", "(0,inf)", bound_l.to_f64_lossy()));
        }
        match smoothness {
            Smoothness::Theta0 => {}
            Smoothness::ThetaK { lipschitz, .. } => {
                if !(lipschitz >= T::zero()) {
                    return Err(Error::domain("trend.smoothness.lipschitz", "[0,inf)", lipschitz.to_f64_lossy()));
                }
            }
            Smoothness::ThetaRho { gamma, holder, .. } => {
                if !(gamma > T::zero() && gamma <= T::one()) {
                    return Err(Error::domain("trend.smoothness.gamma", "(0,1]", gamma.to_f64_lossy()));
                }
                if !(holder >= T::zero()) {
                    return Err(Error::domain("trend.smoothness.holder", "[0,inf)", holder.to_f64_lossy()));
                }
            }
        }
        Ok(Self {
            family,
            bound_l,
            smoothness,
        })
    }

    /// Constant multiplier with `L = max(|value|, tiny)` and no declared smoothness beyond Θ₀.
    pub fn constant(value: T) -> Self {
        let bound = value.abs().max(T::lit(1e-12));
        Self {
            family: TrendFamily::Constant { value },
            bound_l: bound,
            smoothness: Smoothness::ThetaK {
                k: 6,
                lipschitz: T::zero(),
            },
        }
    }

    pub fn family(&self) -> &TrendFamily<T> {
        &self.family
    }

    pub fn bound_l(&self) -> T {
        self.bound_l
    }

    pub fn smoothness(&self) -> Smoothness<T> {
        self.smoothness
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        self.derivative(0, t)
    }

    /// `θ^{(order)}(t)`.
    pub fn derivative(&self, order: usize, t: T) -> T {
        match &self.family {
            TrendFamily::Constant { value } => {
                if order == 0 {
                    *value
                } else {
                    T::zero()
                }
            }
            TrendFamily::Affine { intercept, slope } => match order {
                0 => *intercept + *slope * t,
                1 => *slope,
                _ => T::zero(),
            },
            TrendFamily::Sine {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                let omega = T::lit(2.0) * T::PI() * *frequency;
                let shift = T::FRAC_PI_2() * T::from_usize_lossy(order);
                let wave = *amplitude * omega.powi(order as i32) * (omega * t + *phase + shift).sin();
                if order == 0 {
                    *offset + wave
                } else {
                    wave
                }
            }
            TrendFamily::Polynomial { coefficients } => {
                // Horner on the differentiated coefficients.
                let mut acc = T::zero();
                for (i, &c) in coefficients.iter().enumerate().skip(order).rev() {
                    let falling = ((i - order + 1)..=i).fold(T::one(), |f, m| f * T::from_usize_lossy(m));
                    acc = acc * t + c * falling;
                }
                acc
            }
            TrendFamily::Logistic {
                base,
                height,
                rate,
                midpoint,
            } => {
                let s = T::one() / (T::one() + (-*rate * (t - *midpoint)).exp());
                let poly = sigmoid_derivative_poly(order);
                let ds = poly.iter().rev().fold(T::zero(), |acc, &c| acc * s + T::lit(c));
                let v = *height * rate.powi(order as i32) * ds;
                if order == 0 {
                    *base + v
                } else {
                    v
                }
            }
            TrendFamily::Custom(f) => f(order, t),
        }
    }

    /// Spot-checks `|θ(t)| ≤ L` on 1001 equispaced points of `[0, horizon]`.
    pub fn check_bound(&self, horizon: T) -> Result<()> {
        let slack = T::one() + T::lit(1e-12);
        for i in 0..=1000 {
            let t = horizon * T::from_usize_lossy(i) / T::lit(1000.0);
            let v = self.eval(t);
            if !v.is_finite() || v.abs() > self.bound_l * slack {
                return Err(Error::Config(format!(
                    "trend.bound_L = {} violated: |θ({t})| = {}",
                    self.bound_l,
                    v.abs()
                )));
            }
        }
        Ok(())
    }

    /// Spot-checks the declared Lipschitz/Hölder condition on random pairs.
    pub fn check_smoothness(&self, horizon: T, n_pairs: usize, seed: u64) -> Result<()> {
        let (k, constant, exponent) = match self.smoothness {
            Smoothness::Theta0 => return Ok(()),
            Smoothness::ThetaK { k, lipschitz } => (k, lipschitz, T::one()),
            Smoothness::ThetaRho { k, gamma, holder } => (k, holder, gamma),
        };
        let mut rng = rng_from_seed(seed);
        let h = horizon.to_f64_lossy();
        for _ in 0..n_pairs {
            let x = T::lit(rng.random_range(0.0..=h));
            let y = T::lit(rng.random_range(0.0..=h));
            let lhs = (self.derivative(k, x) - self.derivative(k, y)).abs();
            let rhs = constant * (x - y).abs().powf(exponent);
            if lhs > rhs * (T::one() + T::lit(1e-9)) + T::lit(1e-12) {
                return Err(Error::Config(format!(
                    "trend.smoothness violated at ({x}, {y}): |Δθ^({k})| = {lhs} > {rhs}"
                )));
            }
        }
        Ok(())
    }
}
