//! Kernel estimators of `J(t) = θ(t) x_t` (from increments of `X`) and of
//! `θ(t)` itself (from increments of the observation process `Y`).
//!
//! Both integrals are discretized as left-point Riemann–Stieltjes sums over
//! the grid. Kernel windows must stay inside `[0, T]`; evaluation points
//! that would push the window out are rejected, never truncated.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelFunction;
use crate::scalar::Scalar;
use crate::sde_sim::SdePath;

/// Minimum number of grid steps per bandwidth (`Δ ≤ φ / 20`).
pub const STEPS_PER_BANDWIDTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BandwidthRule<T> {
    Explicit { phi: T },
    /// `φ = ε^{1/(k+1)}`.
    RateK { k: usize },
    /// `φ = ε^{1/ρ}`.
    RateRho { rho: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateTarget {
    /// `θ(t) x_t`
    J,
    /// `θ(t)`
    Theta,
}

pub fn resolve_bandwidth<T: Scalar>(rule: BandwidthRule<T>, epsilon: T) -> Result<T> {
    if !(epsilon < T::one()) || epsilon < T::zero() || epsilon.is_nan() {
        return Err(Error::domain("epsilon", "(0,1)", epsilon.to_f64_lossy()));
    }
    let rate_eps = || {
        if epsilon > T::zero() {
            Ok(epsilon)
        } else {
            Err(Error::domain("epsilon", "(0,1)", epsilon.to_f64_lossy()))
        }
    };
    match rule {
        BandwidthRule::Explicit { phi } => {
            if phi > T::zero() && phi.is_finite() {
                Ok(phi)
            } else {
                Err(Error::domain("estimator.phi", "(0,inf)", phi.to_f64_lossy()))
            }
        }
        BandwidthRule::RateK { k } => Ok(rate_eps()?.powf(T::one() / T::from_usize_lossy(k + 1))),
        BandwidthRule::RateRho { rho } => {
            if !(rho > T::one()) {
                return Err(Error::domain("estimator.rho", "(1,inf)", rho.to_f64_lossy()));
            }
            Ok(rate_eps()?.powf(T::one() / rho))
        }
    }
}

/// Largest admissible evaluation window `[−A φ, T − B φ]`.
pub fn effective_window<T: Scalar>(kernel: &KernelFunction<T>, phi: T, horizon: T) -> Result<(T, T)> {
    let width = phi * (kernel.support_b() - kernel.support_a());
    if !(width < horizon) {
        return Err(Error::Config(format!(
            "empty evaluation window: φ·(B−A) = {width} ≥ T = {horizon} (φ = {phi})"
        )));
    }
    Ok((-kernel.support_a() * phi, horizon - kernel.support_b() * phi))
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig<T> {
    kernel: KernelFunction<T>,
    epsilon: T,
    rule: BandwidthRule<T>,
    phi: T,
    horizon: T,
    window: (T, T),
    allow_coarse_grid: bool,
}

impl<T: Scalar> EstimatorConfig<T> {
    /// Resolves the bandwidth and takes the largest admissible window.
    pub fn new(kernel: KernelFunction<T>, epsilon: T, rule: BandwidthRule<T>, horizon: T) -> Result<Self> {
        let phi = resolve_bandwidth(rule, epsilon)?;
        if !(phi < horizon) {
            return Err(Error::domain("estimator.phi", "(0,T)", phi.to_f64_lossy()));
        }
        let window = effective_window(&kernel, phi, horizon)?;
        Ok(Self {
            kernel,
            epsilon,
            rule,
            phi,
            horizon,
            window,
            allow_coarse_grid: false,
        })
    }

    /// Restricts evaluation to `[c, d]`, which must lie inside the effective window.
    pub fn with_window(mut self, c: T, d: T) -> Result<Self> {
        let (lo, hi) = effective_window(&self.kernel, self.phi, self.horizon)?;
        let tol = self.tolerance();
        if !(c <= d) || c < lo - tol || d > hi + tol {
            return Err(Error::Config(format!(
                "window [{c}, {d}] is not inside the admissible window [{lo}, {hi}] for φ = {}",
                self.phi
            )));
        }
        self.window = (c, d);
        Ok(self)
    }

    /// Accept grids coarser than `Δ ≤ φ/20`.
    pub fn allow_coarse_grid(mut self, allow: bool) -> Self {
        self.allow_coarse_grid = allow;
        self
    }

    pub fn kernel(&self) -> &KernelFunction<T> {
        &self.kernel
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn rule(&self) -> BandwidthRule<T> {
        self.rule
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn window(&self) -> (T, T) {
        self.window
    }

    pub fn coarse_grid_allowed(&self) -> bool {
        self.allow_coarse_grid
    }

    fn tolerance(&self) -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) * self.horizon
    }

    /// `Δ ≤ φ/20`.
    pub fn resolution_ok(&self, step: T) -> bool {
        step <= self.phi / T::lit(STEPS_PER_BANDWIDTH) * (T::one() + T::lit(1e-12))
    }

    fn check_path(&self, path: &SdePath<T>) -> Result<()> {
        let grid = path.grid;
        if (grid.horizon() - self.horizon).abs() > self.tolerance() {
            return Err(Error::Precondition(format!(
                "path horizon {} differs from estimator horizon {}",
                grid.horizon(),
                self.horizon
            )));
        }
        if !self.allow_coarse_grid && !self.resolution_ok(grid.step()) {
            return Err(Error::Precondition(format!(
                "grid step Δ = {} exceeds φ/20 = {} (use the resolution override to proceed)",
                grid.step(),
                self.phi / T::lit(STEPS_PER_BANDWIDTH)
            )));
        }
        Ok(())
    }

    /// Checks that `t ∈ [c, d]` and that `[t + lo·φ, t + hi·φ] ⊂ [0, T]`.
    fn check_point(&self, t: T, lo: T, hi: T) -> Result<()> {
        let tol = self.tolerance();
        let (c, d) = self.window;
        if !(t >= c - tol && t <= d + tol) {
            return Err(Error::Precondition(format!("t = {t} outside the evaluation window [{c}, {d}]")));
        }
        let (left, right) = (t + lo * self.phi, t + hi * self.phi);
        if left < -tol || right > self.horizon + tol {
            return Err(Error::Precondition(format!(
                "kernel window [{left}, {right}] at t = {t} leaves [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// `Σ_i K(sign·(t_i − t)/φ) · incr[i] / φ` over the nodes inside the support.
fn kernel_sum<T: Scalar>(config: &EstimatorConfig<T>, path: &SdePath<T>, t: T, incr: &[T], mirrored: bool) -> T {
    let grid = path.grid;
    let n = grid.n_steps();
    let phi = config.phi;
    let k = &config.kernel;
    let (lo, hi) = if mirrored {
        (-k.support_b(), -k.support_a())
    } else {
        (k.support_a(), k.support_b())
    };
    let dt = grid.step();
    let first = ((t + lo * phi) / dt).floor().to_isize().unwrap_or(0).saturating_sub(1).max(0) as usize;
    let last = ((t + hi * phi) / dt).ceil().to_isize().unwrap_or(0).saturating_add(1).max(0) as usize;
    let last = last.min(n - 1);
    let mut acc = T::zero();
    for (i, &d) in incr.iter().enumerate().take(last + 1).skip(first) {
        let u = (grid.node(i) - t) / phi;
        let w = if mirrored { k.eval(-u) } else { k.eval(u) };
        acc = acc + w * d;
    }
    acc / phi
}

/// `(1/φ) Σ_i K((t_i − t)/φ)(X_{i+1} − X_i)`, the estimate of `θ(t) x_t`.
pub fn estimate_j<T: Scalar>(path: &SdePath<T>, config: &EstimatorConfig<T>, t: T) -> Result<T> {
    config.check_path(path)?;
    let k = config.kernel();
    config.check_point(t, k.support_a(), k.support_b())?;
    let dx: Vec<T> = path.x.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(kernel_sum(config, path, t, &dx, false))
}

/// `I(A_T) (1/φ) Σ_i K((t − t_i)/φ) ΔY_i`, the estimate of `θ(t)`.
pub fn estimate_theta<T: Scalar>(path: &SdePath<T>, config: &EstimatorConfig<T>, t: T) -> Result<T> {
    config.check_path(path)?;
    let k = config.kernel();
    config.check_point(t, -k.support_b(), -k.support_a())?;
    if path.y_increments.len() != path.grid.n_steps() {
        return Err(Error::Precondition("path carries no Y increments".into()));
    }
    if !path.event_a() {
        return Ok(T::zero());
    }
    Ok(kernel_sum(config, path, t, &path.y_increments, true))
}

pub fn estimate<T: Scalar>(path: &SdePath<T>, config: &EstimatorConfig<T>, target: EstimateTarget, t: T) -> Result<T> {
    match target {
        EstimateTarget::J => estimate_j(path, config, t),
        EstimateTarget::Theta => estimate_theta(path, config, t),
    }
}

/// `n` equispaced points of `[c, d]`; a single point sits at the midpoint.
pub fn equispaced<T: Scalar>(c: T, d: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![(c + d) / T::lit(2.0)],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    d
                } else {
                    c + (d - c) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCurve<T> {
    pub eval_points: Vec<T>,
    pub values: Vec<T>,
    pub target: EstimateTarget,
    pub kernel: String,
    pub phi: T,
    pub epsilon: T,
    pub window: (T, T),
}

#[derive(Serialize)]
struct CurveHeader<'a> {
    target: EstimateTarget,
    kernel: &'a str,
    phi: f64,
    epsilon: f64,
    window: [f64; 2],
}

impl<T: Scalar> EstimateCurve<T> {
    /// Header block of `#`-prefixed JSON, then `t,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = CurveHeader {
            target: self.target,
            kernel: &self.kernel,
            phi: self.phi.to_f64_lossy(),
            epsilon: self.epsilon.to_f64_lossy(),
            window: [self.window.0.to_f64_lossy(), self.window.1.to_f64_lossy()],
        };
        writeln!(w, "# {}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
        writeln!(w, "t,value")?;
        for (t, v) in self.eval_points.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 csv")
    }
}

pub fn estimate_curve<T: Scalar>(
    path: &SdePath<T>,
    config: &EstimatorConfig<T>,
    target: EstimateTarget,
    n_eval: usize,
) -> Result<EstimateCurve<T>> {
    if n_eval == 0 {
        return Err(Error::domain("estimator.n_eval", "[1,inf)", 0.0));
    }
    let (c, d) = config.window();
    let eval_points = equispaced(c, d, n_eval);
    let values = eval_points
        .iter()
        .map(|&t| estimate(path, config, target, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateCurve {
        eval_points,
        values,
        target,
        kernel: config.kernel().name().to_string(),
        phi: config.phi(),
        epsilon: config.epsilon(),
        window: config.window(),
    })
}
