//! Compactly supported smoothing kernels.
//!
//! Built-in kernels live on `[-1, 1]`. Higher-order kernels are polynomials
//! in the Legendre basis of the support whose coefficients solve the moment
//! constraints `∫K = 1`, `∫u^j K = 0` for `j = 1..=k`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_number_1, solve};
use crate::quadrature::GaussLegendre;
use crate::scalar::Scalar;

/// Moments are checked up to this power when computing the order.
pub const MAX_ORDER_CHECK: usize = 20;
/// Largest order accepted by [`build_higher_order`].
pub const MAX_CONSTRUCTED_ORDER: usize = 10;
/// Condition-number limit for the moment system.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Tolerance under which a moment counts as vanishing.
pub fn moment_tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(100.0))
}

/// Tolerance on `|∫K − 1|`.
pub fn normalization_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

pub type CustomKernel<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
enum Shape<T> {
    Uniform,
    Triangular,
    Epanechnikov,
    /// Coefficients on Legendre polynomials of the support mapped to [-1, 1].
    Legendre(Vec<T>),
    Custom(CustomKernel<T>),
}

/// A kernel `K` vanishing outside the closed support `[A, B]`.
#[derive(Clone)]
pub struct KernelFunction<T> {
    shape: Shape<T>,
    support_a: T,
    support_b: T,
    order_k: usize,
    name: String,
}

impl<T: fmt::Debug> fmt::Debug for KernelFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFunction")
            .field("name", &self.name)
            .field("support", &(&self.support_a, &self.support_b))
            .field("order_k", &self.order_k)
            .finish()
    }
}

fn legendre_series<T: Scalar>(coeffs: &[T], x: T) -> T {
    let mut p_prev = T::one();
    let mut acc = coeffs.first().copied().unwrap_or_else(T::zero);
    if coeffs.len() < 2 {
        return acc;
    }
    let mut p = x;
    acc = acc + coeffs[1] * p;
    for (i, &c) in coeffs.iter().enumerate().skip(2) {
        let n = T::from_usize_lossy(i);
        let next = ((T::lit(2.0) * n - T::one()) * x * p - (n - T::one()) * p_prev) / n;
        p_prev = p;
        p = next;
        acc = acc + c * p;
    }
    acc
}

impl<T: Scalar> KernelFunction<T> {
    fn with_shape(shape: Shape<T>, support_a: T, support_b: T, name: impl Into<String>) -> Self {
        let mut k = Self {
            shape,
            support_a,
            support_b,
            order_k: 0,
            name: name.into(),
        };
        k.order_k = k.vanishing_order();
        k
    }

    /// Arbitrary user kernel on `[A, B]`; nothing is assumed about it.
    pub fn custom<F>(name: impl Into<String>, support_a: T, support_b: T, eval: F) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        check_support(support_a, support_b)?;
        Ok(Self::with_shape(Shape::Custom(Arc::new(eval)), support_a, support_b, name))
    }

    #[inline]
    pub fn eval(&self, u: T) -> T {
        if u < self.support_a || u > self.support_b || u.is_nan() {
            return T::zero();
        }
        match &self.shape {
            Shape::Uniform => T::lit(0.5),
            Shape::Triangular => T::one() - u.abs(),
            Shape::Epanechnikov => T::lit(0.75) * (T::one() - u * u),
            Shape::Legendre(c) => {
                let x = (T::lit(2.0) * u - self.support_a - self.support_b) / (self.support_b - self.support_a);
                legendre_series(c, x)
            }
            Shape::Custom(f) => f(u),
        }
    }

    pub fn support_a(&self) -> T {
        self.support_a
    }

    pub fn support_b(&self) -> T {
        self.support_b
    }

    /// Largest `k` with moments `1..=k` vanishing.
    pub fn order_k(&self) -> usize {
        self.order_k
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Legendre coefficients for constructed kernels.
    pub fn coefficients(&self) -> Option<&[T]> {
        match &self.shape {
            Shape::Legendre(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.support_a == -self.support_b
            && match &self.shape {
                Shape::Uniform | Shape::Triangular | Shape::Epanechnikov => true,
                Shape::Legendre(c) => c.iter().skip(1).step_by(2).all(|v| *v == T::zero()),
                Shape::Custom(_) => false,
            }
    }

    /// Integrates `f(u)·K(u)` over the support, split at 0 when interior.
    fn integrate_against<F: Fn(T) -> T>(&self, f: F) -> T {
        let rule = GaussLegendre::standard();
        let (a, b) = (self.support_a, self.support_b);
        let g = |u: T| f(u) * self.eval(u);
        if a < T::zero() && b > T::zero() {
            rule.integrate(a, T::zero(), g) + rule.integrate(T::zero(), b, g)
        } else {
            rule.integrate(a, b, g)
        }
    }

    fn vanishing_order(&self) -> usize {
        let tol = moment_tolerance::<T>();
        (1..=MAX_ORDER_CHECK)
            .take_while(|&j| moment(self, j).abs() <= tol)
            .count()
    }
}

fn check_support<T: Scalar>(a: T, b: T) -> Result<()> {
    if !(a < T::zero()) || !a.is_finite() {
        return Err(Error::domain("kernel.support_a", "(-inf,0)", a.to_f64_lossy()));
    }
    if !(b > T::zero()) || !b.is_finite() {
        return Err(Error::domain("kernel.support_b", "(0,inf)", b.to_f64_lossy()));
    }
    Ok(())
}

/// `∫ u^j K(u) du` by 200-node Gauss–Legendre on each side of the origin.
pub fn moment<T: Scalar>(kernel: &KernelFunction<T>, j: usize) -> T {
    let p = j as i32;
    kernel.integrate_against(|u| u.powi(p))
}

/// Built-in kernels by name: `uniform`, `triangular`, `epanechnikov`.
pub fn builtin<T: Scalar>(name: &str) -> Result<KernelFunction<T>> {
    let shape = match name {
        "uniform" => Shape::Uniform,
        "triangular" => Shape::Triangular,
        "epanechnikov" => Shape::Epanechnikov,
        other => return Err(Error::Config(format!("unknown kernel `{other}`"))),
    };
    Ok(KernelFunction::with_shape(shape, -T::one(), T::one(), name))
}

/// Resolves a kernel name as used in configuration files: a builtin name
/// or `order:k`.
pub fn from_name<T: Scalar>(name: &str) -> Result<KernelFunction<T>> {
    match name.strip_prefix("order:") {
        Some(k) => {
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("kernel `{name}`: order must be a positive integer")))?;
            build_higher_order(k, -T::one(), T::one())
        }
        None => builtin(name),
    }
}

/// Polynomial kernel on `[A, B]` with vanishing moments `1..=k`.
pub fn build_higher_order<T: Scalar>(k: usize, support_a: T, support_b: T) -> Result<KernelFunction<T>> {
    if k == 0 || k > MAX_CONSTRUCTED_ORDER {
        return Err(Error::domain("kernel.order", "[1,10]", k as f64));
    }
    check_support(support_a, support_b)?;
    let n = k + 1;
    let rule = GaussLegendre::standard();
    let (a, b) = (support_a, support_b);
    let to_ref = |u: T| (T::lit(2.0) * u - a - b) / (b - a);
    // system[j][i] = ∫ u^j P_i(x(u)) du
    let system: Vec<Vec<T>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let mut unit = vec![T::zero(); i + 1];
                    unit[i] = T::one();
                    rule.integrate(a, b, |u: T| u.powi(j as i32) * legendre_series(&unit, to_ref(u)))
                })
                .collect()
        })
        .collect();
    let condition = condition_number_1(&system);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let mut rhs = vec![T::zero(); n];
    rhs[0] = T::one();
    let mut coeffs = solve(&system, &rhs).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })?;
    if a == -b {
        // Odd Legendre terms are forced to zero on symmetric supports.
        for c in coeffs.iter_mut().skip(1).step_by(2) {
            *c = T::zero();
        }
    }
    let kernel = KernelFunction::with_shape(Shape::Legendre(coeffs), a, b, format!("order:{k}"));
    if kernel.order_k() < k {
        return Err(Error::Config(format!(
            "constructed kernel only reaches order {} (requested {k})",
            kernel.order_k()
        )));
    }
    Ok(kernel)
}

/// Outcome of checking the support/normalization and moment conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub name: String,
    pub support: (f64, f64),
    pub a2_ok: bool,
    pub normalization_error: f64,
    pub vanishes_outside_support: bool,
    pub bounded: bool,
    pub a3_order: usize,
    /// Signed moments `∫u^j K` for `j = 0..=a3_order + 1`.
    pub moments: Vec<f64>,
    /// `∫|u^j K|` for `j = 0..=a3_order + 1`.
    pub abs_moments: Vec<f64>,
    /// `∫ K²`.
    pub l2_norm_sq: f64,
}

pub fn verify_conditions<T: Scalar>(kernel: &KernelFunction<T>) -> KernelReport {
    let (a, b) = (kernel.support_a(), kernel.support_b());
    let normalization_error = (moment(kernel, 0) - T::one()).abs();
    let vanishes_outside_support = (0..50).all(|i| {
        let off = T::from_usize_lossy(i + 1) / T::lit(50.0);
        kernel.eval(a - off) == T::zero() && kernel.eval(b + off) == T::zero()
    });
    let bounded = (0..=1000).all(|i| {
        let u = a + (b - a) * T::from_usize_lossy(i) / T::lit(1000.0);
        kernel.eval(u).is_finite()
    });
    let a2_ok = normalization_error <= normalization_tolerance::<T>() && vanishes_outside_support && bounded;
    let a3_order = kernel.order_k();
    let moments = (0..=a3_order + 1).map(|j| moment(kernel, j).to_f64_lossy()).collect();
    let abs_moments = (0..=a3_order + 1)
        .map(|j| {
            kernel
                .integrate_against(|u| u.abs().powi(j as i32) * kernel.eval(u).signum())
                .to_f64_lossy()
        })
        .collect();
    let l2_norm_sq = kernel.integrate_against(|u| kernel.eval(u)).to_f64_lossy();
    KernelReport {
        name: kernel.name().to_string(),
        support: (a.to_f64_lossy(), b.to_f64_lossy()),
        a2_ok,
        normalization_error: normalization_error.to_f64_lossy(),
        vanishes_outside_support,
        bounded,
        a3_order,
        moments,
        abs_moments,
        l2_norm_sq,
    }
}
