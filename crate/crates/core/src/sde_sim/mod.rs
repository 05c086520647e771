//! Small-noise linear SDE `dX = θ(t) X dt + ε dG`, its deterministic limit
//! `dx = θ(t) x dt`, and the observation process `dY = I(A_t) X⁻¹ dX`.
//!
//! The driver enters additively, so an Euler step with exact Gaussian
//! increments only discretizes the drift.

mod trend;

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

pub use trend::{CustomTrend, Smoothness, TrendFamily, TrendFunction};

use crate::error::{Error, Result};
use crate::gp_cov::{mean_and_se, CovarianceModel, GaussianPath, GaussianSampler, GridSpec};
use crate::quadrature::simpson;
use crate::rng::derive_seed;
use crate::scalar::Scalar;

/// Sub-panels per grid interval for the ODE quadrature.
pub const ODE_REFINEMENT: usize = 4;

pub const PATH_CSV_HEADER: &str = "t,X,x_ode,G,indicator_A,Y_increment";

#[derive(Debug, Clone)]
pub struct SdeConfig<T> {
    pub x0: T,
    pub epsilon: T,
    pub trend: TrendFunction<T>,
    pub model: CovarianceModel<T>,
    pub grid: GridSpec<T>,
}

impl<T: Scalar> SdeConfig<T> {
    pub fn new(
        x0: T,
        epsilon: T,
        trend: TrendFunction<T>,
        model: CovarianceModel<T>,
        grid: GridSpec<T>,
    ) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::domain("sde.x0", "finite", x0.to_f64_lossy()));
        }
        if !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::domain("sde.epsilon", "[0,inf)", epsilon.to_f64_lossy()));
        }
        trend.check_bound(grid.horizon())?;
        Ok(Self {
            x0,
            epsilon,
            trend,
            model,
            grid,
        })
    }

    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        Self::new(self.x0, epsilon, self.trend.clone(), self.model.clone(), self.grid)
    }
}

/// A simulated (or loaded) path on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath<T> {
    pub grid: GridSpec<T>,
    pub x: Vec<T>,
    pub x_ode: Vec<T>,
    pub noise: GaussianPath<T>,
    /// `A_{t_i}` per node; once false it stays false.
    pub indicator_a: Vec<bool>,
    /// `I(A_{t_i}) (X_{i+1} − X_i) / X_i` per interval.
    pub y_increments: Vec<T>,
    pub epsilon: T,
    pub x0: T,
}

impl<T: Scalar> SdePath<T> {
    /// Global event `A = A_T`.
    pub fn event_a(&self) -> bool {
        self.indicator_a.last().copied().unwrap_or(false)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{PATH_CSV_HEADER}")?;
        let n = self.grid.n_steps();
        for i in 0..=n {
            let y = if i < n {
                self.y_increments[i].to_string()
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.grid.node(i),
                self.x[i],
                self.x_ode[i],
                self.noise.values[i],
                u8::from(self.indicator_a[i]),
                y
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Loads a path written by [`SdePath::write_csv`]. `t` and `X` are always
    /// required; `indicator_A` and `Y_increment` only when `require_observation`.
    /// Missing optional numeric columns load as NaN.
    pub fn read_csv<R: BufRead>(reader: R, epsilon: T, require_observation: bool) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("empty file".into()))??;
        let cols: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let need = |name: &str| find(name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")));
        let t_col = need("t")?;
        let x_col = need("X")?;
        let (a_col, y_col) = if require_observation {
            (Some(need("indicator_A")?), Some(need("Y_increment")?))
        } else {
            (find("indicator_A"), find("Y_increment"))
        };
        let ode_col = find("x_ode");
        let g_col = find("G");

        let parse = |s: &str, line: usize, name: &str| -> Result<T> {
            s.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Schema(format!("line {line}: column `{name}` is not a number: `{s}`")))
        };
        let (mut ts, mut xs, mut odes, mut gs, mut ind, mut ys) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let lineno = k + 2;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Schema(format!(
                    "line {lineno}: expected {} fields, found {}",
                    cols.len(),
                    fields.len()
                )));
            }
            ts.push(parse(fields[t_col], lineno, "t")?);
            xs.push(parse(fields[x_col], lineno, "X")?);
            odes.push(match ode_col {
                Some(c) => parse(fields[c], lineno, "x_ode")?,
                None => T::nan(),
            });
            gs.push(match g_col {
                Some(c) => parse(fields[c], lineno, "G")?,
                None => T::nan(),
            });
            ind.push(match a_col {
                Some(c) => match fields[c].trim() {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => {
                        return Err(Error::Schema(format!(
                            "line {lineno}: column `indicator_A` must be 0/1, got `{other}`"
                        )))
                    }
                },
                None => false,
            });
            ys.push(match y_col {
                Some(c) if !fields[c].trim().is_empty() => Some(parse(fields[c], lineno, "Y_increment")?),
                _ => None,
            });
        }
        if ts.len() < 3 {
            return Err(Error::Schema(format!("need at least 3 rows, found {}", ts.len())));
        }
        let n = ts.len() - 1;
        let grid = GridSpec::new(ts[n], n)?;
        let tol = T::lit(1e-9) * grid.horizon();
        for (i, &t) in ts.iter().enumerate() {
            if (t - grid.node(i)).abs() > tol {
                return Err(Error::Schema(format!("column `t` is not a uniform grid starting at 0 (row {i})")));
            }
        }
        let y_increments: Vec<T> = ys[..n]
            .iter()
            .enumerate()
            .map(|(i, y)| match (y, y_col) {
                (Some(v), _) => Ok(*v),
                (None, Some(_)) => Err(Error::Schema(format!("row {i}: `Y_increment` is empty"))),
                (None, None) => Ok(T::nan()),
            })
            .collect::<Result<_>>()?;
        let x0 = xs[0];
        Ok(Self {
            grid,
            x: xs,
            x_ode: odes,
            noise: GaussianPath {
                grid,
                values: gs,
                seed: 0,
            },
            indicator_a: ind,
            y_increments,
            epsilon,
            x0,
        })
    }
}

/// `x_0 exp(∫₀^{t_i} θ)` on every node; each interval is integrated with
/// composite Simpson on [`ODE_REFINEMENT`] sub-panels.
pub fn ode_solution<T: Scalar>(trend: &TrendFunction<T>, x0: T, grid: &GridSpec<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut integral = T::zero();
    out.push(x0);
    for i in 0..grid.n_steps() {
        integral = integral + simpson(grid.node(i), grid.node(i + 1), ODE_REFINEMENT, |s| trend.eval(s));
        out.push(x0 * integral.exp());
    }
    out
}

/// `x(t)` at an arbitrary time, with Simpson on `panels` sub-panels.
pub fn ode_value_at<T: Scalar>(trend: &TrendFunction<T>, x0: T, t: T, panels: usize) -> T {
    if t == T::zero() {
        return x0;
    }
    x0 * simpson(T::zero(), t, panels, |s| trend.eval(s)).exp()
}

/// `J^{(order)}(t)` for `J = θ x`, given `x(t)`.
///
/// Since `J = x′`, this is `x^{(order+1)}(t)` obtained from the Leibniz rule
/// `x^{(m+1)} = Σ_j C(m, j) θ^{(j)} x^{(m−j)}`.
pub fn j_derivative<T: Scalar>(trend: &TrendFunction<T>, x_t: T, t: T, order: usize) -> T {
    let theta: Vec<T> = (0..=order).map(|j| trend.derivative(j, t)).collect();
    let mut xd = vec![x_t];
    for m in 0..=order {
        let mut binom = T::one();
        let mut acc = T::zero();
        for j in 0..=m {
            acc = acc + binom * theta[j] * xd[m - j];
            binom = binom * T::from_usize_lossy(m - j) / T::from_usize_lossy(j + 1);
        }
        xd.push(acc);
    }
    xd[order + 1]
}

/// Simulation bound to a cached driver factorization.
///
/// With `ε = 0` the driver is never factored or sampled; paths then carry `G ≡ 0`.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    config: SdeConfig<T>,
    sampler: Option<Arc<GaussianSampler<T>>>,
    x_ode: Arc<Vec<T>>,
}

impl<T: Scalar> Simulator<T> {
    pub fn new(config: SdeConfig<T>) -> Result<Self> {
        if config.epsilon == T::zero() {
            let x_ode = Arc::new(ode_solution(&config.trend, config.x0, &config.grid));
            return Ok(Self {
                config,
                sampler: None,
                x_ode,
            });
        }
        let sampler = Arc::new(GaussianSampler::new(&config.model, &config.grid)?);
        Self::with_sampler(config, sampler)
    }

    pub fn with_sampler(config: SdeConfig<T>, sampler: Arc<GaussianSampler<T>>) -> Result<Self> {
        if *sampler.grid() != config.grid {
            return Err(Error::Config("sampler grid differs from the SDE grid".into()));
        }
        let x_ode = Arc::new(ode_solution(&config.trend, config.x0, &config.grid));
        Ok(Self {
            config,
            sampler: Some(sampler),
            x_ode,
        })
    }

    /// Same driver, different noise scale.
    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        let config = self.config.with_epsilon(epsilon)?;
        let sampler = match &self.sampler {
            Some(s) => Some(Arc::clone(s)),
            None if epsilon == T::zero() => None,
            None => Some(Arc::new(GaussianSampler::new(&config.model, &config.grid)?)),
        };
        Ok(Self {
            config,
            sampler,
            x_ode: Arc::clone(&self.x_ode),
        })
    }

    pub fn config(&self) -> &SdeConfig<T> {
        &self.config
    }

    /// `None` for a noise-free simulator built with `ε = 0`.
    pub fn sampler(&self) -> Option<&Arc<GaussianSampler<T>>> {
        self.sampler.as_ref()
    }

    pub fn ode(&self) -> &[T] {
        &self.x_ode
    }

    pub fn simulate(&self, seed: u64) -> Result<SdePath<T>> {
        let noise = match &self.sampler {
            Some(s) => s.sample(seed),
            None => GaussianPath {
                grid: self.config.grid,
                values: vec![T::zero(); self.config.grid.n_steps() + 1],
                seed,
            },
        };
        self.simulate_with_noise(noise)
    }

    pub fn simulate_with_noise(&self, noise: GaussianPath<T>) -> Result<SdePath<T>> {
        let cfg = &self.config;
        let grid = cfg.grid;
        let n = grid.n_steps();
        if noise.values.len() != n + 1 {
            return Err(Error::Config("noise path length does not match the grid".into()));
        }
        let dt = grid.step();
        let g = &noise.values;
        // Euler, written as X_i = D_i + εG_i with D accumulating the drift; this
        // is the same recursion but keeps the pure-noise case exact.
        let mut x = Vec::with_capacity(n + 1);
        x.push(cfg.x0);
        let mut drift = cfg.x0;
        for i in 0..n {
            drift = drift + cfg.trend.eval(grid.node(i)) * x[i] * dt;
            x.push(drift + cfg.epsilon * g[i + 1]);
        }

        let half = T::lit(0.5);
        let l = cfg.trend.bound_l();
        let mut indicator_a = Vec::with_capacity(n + 1);
        let mut running_inf = T::infinity();
        let mut alive = cfg.x0 > T::zero();
        for (i, &xi) in x.iter().enumerate() {
            running_inf = running_inf.min(xi);
            let floor = half * cfg.x0 * (-l * grid.node(i)).exp();
            alive = alive && running_inf >= floor;
            indicator_a.push(alive);
        }

        let mut y_increments = Vec::with_capacity(n);
        for i in 0..n {
            if indicator_a[i] {
                if x[i] == T::zero() {
                    return Err(Error::Degenerate {
                        node: i,
                        reason: "X vanishes while A_t holds".into(),
                    });
                }
                y_increments.push((x[i + 1] - x[i]) / x[i]);
            } else {
                y_increments.push(T::zero());
            }
        }

        Ok(SdePath {
            grid,
            x,
            x_ode: self.x_ode.as_ref().clone(),
            noise,
            indicator_a,
            y_increments,
            epsilon: cfg.epsilon,
            x0: cfg.x0,
        })
    }
}

pub fn simulate<T: Scalar>(config: &SdeConfig<T>, seed: u64) -> Result<SdePath<T>> {
    Simulator::new(config.clone())?.simulate(seed)
}

/// Both sides of the pathwise bound `|X_t − x_t| ≤ ε e^{Lt} sup_{s≤t}|G_s|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallPair<T> {
    pub lhs: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> GronwallPair<T> {
    /// Nodes where `lhs > rhs + slack`.
    pub fn violations(&self, slack: T) -> Vec<usize> {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .enumerate()
            .filter(|(_, (l, r))| **l > **r + slack)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn gronwall_bound<T: Scalar>(path: &SdePath<T>, bound_l: T) -> GronwallPair<T> {
    let mut running = T::zero();
    let mut lhs = Vec::with_capacity(path.x.len());
    let mut rhs = Vec::with_capacity(path.x.len());
    for i in 0..path.x.len() {
        running = running.max(path.noise.values[i].abs());
        lhs.push((path.x[i] - path.x_ode[i]).abs());
        rhs.push(path.epsilon * (bound_l * path.grid.node(i)).exp() * running);
    }
    GronwallPair { lhs, rhs }
}

/// Discretization slack for the Gronwall bounds: the largest gap between the
/// noise-free Euler path and the quadrature ODE solution, plus a rounding
/// allowance. The discrete noise part obeys the bound exactly, so this is the
/// only correction a grid needs.
pub fn euler_slack<T: Scalar>(trend: &TrendFunction<T>, x0: T, grid: &GridSpec<T>) -> T {
    let ode = ode_solution(trend, x0, grid);
    let dt = grid.step();
    let mut xe = x0;
    let mut worst = T::zero();
    let mut scale = x0.abs();
    for i in 0..grid.n_steps() {
        xe = xe + trend.eval(grid.node(i)) * xe * dt;
        worst = worst.max((xe - ode[i + 1]).abs());
        scale = scale.max(xe.abs());
    }
    worst + T::lit(64.0) * T::epsilon() * T::from_usize_lossy(grid.n_steps()) * (T::one() + scale)
}

/// Monte Carlo rendering of `sup_t E|X_t − x_t| ≤ e^{LT} ε E[sup|G|]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma21bCheck<T> {
    pub mean_sup_gap: T,
    pub gap_std_error: Option<T>,
    /// Node where the mean gap is largest.
    pub argmax_node: usize,
    pub bound: T,
    pub bound_std_error: Option<T>,
    pub slack: T,
}

impl<T: Scalar> Lemma21bCheck<T> {
    pub fn combined_std_error(&self) -> T {
        let a = self.gap_std_error.unwrap_or_else(T::zero);
        let b = self.bound_std_error.unwrap_or_else(T::zero);
        (a * a + b * b).sqrt()
    }

    /// `mean_sup_gap ≤ bound + n_se · SE + slack`.
    pub fn holds(&self, n_se: T) -> bool {
        self.mean_sup_gap <= self.bound + n_se * self.combined_std_error() + self.slack
    }
}

pub fn lemma21b_check<T: Scalar>(config: &SdeConfig<T>, n_reps: usize, seed: u64) -> Result<Lemma21bCheck<T>> {
    lemma21b_check_with(&Simulator::new(config.clone())?, n_reps, seed)
}

pub fn lemma21b_check_with<T: Scalar>(sim: &Simulator<T>, n_reps: usize, seed: u64) -> Result<Lemma21bCheck<T>> {
    if n_reps < 100 {
        return Err(Error::domain("n_reps", "[100,inf)", n_reps as f64));
    }
    let cfg = sim.config();
    let per_rep: Vec<(Vec<T>, T)> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let path = sim.simulate(derive_seed(seed, &[rep as u64]))?;
            let gaps = path.x.iter().zip(&path.x_ode).map(|(a, b)| (*a - *b).abs()).collect();
            let sup_g = path.noise.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            Ok((gaps, sup_g))
        })
        .collect::<Result<_>>()?;

    let n_nodes = cfg.grid.n_steps() + 1;
    let mut best = (T::neg_infinity(), None, 0usize);
    let mut column = vec![T::zero(); n_reps];
    for node in 0..n_nodes {
        for (rep, (gaps, _)) in per_rep.iter().enumerate() {
            column[rep] = gaps[node];
        }
        let (m, se) = mean_and_se(&column);
        if m > best.0 {
            best = (m, se, node);
        }
    }
    let sups: Vec<T> = per_rep.iter().map(|(_, s)| *s).collect();
    let (sup_mean, sup_se) = mean_and_se(&sups);
    let scale = cfg.epsilon * (cfg.trend.bound_l() * cfg.grid.horizon()).exp();
    Ok(Lemma21bCheck {
        mean_sup_gap: best.0,
        gap_std_error: best.1,
        argmax_node: best.2,
        bound: scale * sup_mean,
        bound_std_error: sup_se.map(|s| scale * s),
        slack: euler_slack(&cfg.trend, cfg.x0, &cfg.grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(theta: f64, x0: f64, eps: f64, n: usize) -> SdeConfig<f64> {
        SdeConfig::new(
            x0,
            eps,
            TrendFunction::constant(theta),
            CovarianceModel::fractional(0.5).unwrap(),
            GridSpec::new(1.0, n).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_trend_ode() {
        let trend = TrendFunction::constant(0.5);
        let grid = GridSpec::new(2.0, 8).unwrap();
        let x = ode_solution(&trend, 1.0, &grid);
        assert_abs_diff_eq!(x[8], std::f64::consts::E, epsilon = 1e-13);
        let zero = ode_solution(&TrendFunction::constant(0.0), 3.0, &grid);
        assert!(zero.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn sine_trend_full_period_integral_vanishes() {
        let trend = TrendFunction::new(
            TrendFamily::Sine { offset: 0.0, amplitude: 1.0, frequency: 1.0, phase: 0.0 },
            1.0,
            Smoothness::Theta0,
        )
        .unwrap();
        let grid = GridSpec::new(1.0, 64).unwrap();
        let x = ode_solution(&trend, 2.0, &grid);
        assert_abs_diff_eq!(x[64], 2.0, epsilon = 1e-12);
        // Oracle: ∫₀^{1/4} sin(2πs) ds = 1/(2π)
        assert_abs_diff_eq!(x[16], 2.0 * (1.0 / (2.0 * std::f64::consts::PI)).exp(), epsilon = 2e-8);
    }

    #[test]
    fn pure_noise_case() {
        let cfg = config(0.0, 0.0, 0.3, 32);
        let path = simulate(&cfg, 5).unwrap();
        for (x, g) in path.x.iter().zip(&path.noise.values) {
            assert_abs_diff_eq!(*x, 0.3 * g, epsilon = 1e-15);
        }
        // x0 = 0 has no positive floor: the observation process is switched off.
        assert!(path.indicator_a.iter().all(|a| !a));
        assert!(path.y_increments.iter().all(|y| *y == 0.0));
    }

    #[test]
    fn noise_free_limit_matches_euler_oracle() {
        // Oracle: Euler for constant θ gives x0 (1 + θΔ)^i exactly.
        let cfg = config(0.5, 1.0, 1e-12, 2048);
        let path = simulate(&cfg, 1).unwrap();
        let dt = 1.0 / 2048.0;
        for i in [1, 100, 1024, 2048] {
            assert_abs_diff_eq!(path.x[i], (1.0f64 + 0.5 * dt).powi(i as i32), epsilon = 1e-9);
        }
        let gap = path.x.iter().zip(&path.x_ode).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // Global Euler error ≈ θ² T Δ / 2 · x_T.
        let predicted = 0.25 * dt / 2.0 * 0.5f64.exp();
        assert!(gap <= 1.05 * predicted, "gap {gap} vs {predicted}");
        assert!(path.indicator_a.iter().all(|&a| a));
    }

    #[test]
    fn indicator_is_monotone_and_gates_y() {
        // Large noise relative to x0 forces A to fail somewhere.
        let cfg = config(0.0, 0.05, 1.0, 256);
        let mut saw_failure = false;
        for seed in 0..20 {
            let path = simulate(&cfg, seed).unwrap();
            let first_false = path.indicator_a.iter().position(|a| !a);
            if let Some(k) = first_false {
                saw_failure = true;
                assert!(path.indicator_a[k..].iter().all(|a| !a));
                assert!(path.y_increments[k.min(path.y_increments.len())..].iter().all(|y| *y == 0.0));
            }
        }
        assert!(saw_failure);
    }

    #[test]
    fn y_increments_telescope_to_integral_of_theta() {
        let cfg = config(0.5, 1.0, 0.0, 1024);
        let path = simulate(&cfg, 0).unwrap();
        let sum: f64 = path.y_increments.iter().sum();
        assert_abs_diff_eq!(sum, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gronwall_exact_when_theta_zero() {
        let cfg = config(0.0, 1.0, 0.1, 128);
        let path = simulate(&cfg, 3).unwrap();
        let pair = gronwall_bound(&path, 0.0);
        // Only summation rounding separates the two sides.
        let rounding = euler_slack(&cfg.trend, 1.0, &cfg.grid);
        assert!(rounding < 1e-11);
        assert!(pair.violations(rounding).is_empty());
        for (i, l) in pair.lhs.iter().enumerate() {
            assert_abs_diff_eq!(*l, 0.1 * path.noise.values[i].abs(), epsilon = 1e-14);
        }
    }

    #[test]
    fn gronwall_noise_free() {
        let cfg = config(0.7, 1.0, 0.0, 256);
        let path = simulate(&cfg, 3).unwrap();
        let pair = gronwall_bound(&path, 0.7);
        assert!(pair.rhs.iter().all(|r| *r == 0.0));
        let slack = euler_slack(&cfg.trend, 1.0, &cfg.grid);
        assert!(pair.violations(slack).is_empty());
        assert!(!pair.violations(0.0).is_empty());
    }

    #[test]
    fn j_derivative_constant_theta() {
        // J = θ x0 e^{θt} ⇒ J'' = θ³ x_t.
        let trend = TrendFunction::constant(0.5);
        let x_t = 0.25f64.exp();
        assert_abs_diff_eq!(j_derivative(&trend, x_t, 0.5, 0), 0.5 * x_t, epsilon = 1e-15);
        assert_abs_diff_eq!(j_derivative(&trend, x_t, 0.5, 2), 0.125 * x_t, epsilon = 1e-15);
    }

    #[test]
    fn j_derivative_matches_finite_differences() {
        let trend = TrendFunction::new(
            TrendFamily::Sine { offset: 0.3, amplitude: 0.2, frequency: 1.0, phase: 0.0 },
            0.5,
            Smoothness::Theta0,
        )
        .unwrap();
        let j_at = |order: usize, t: f64| {
            let x_t = ode_value_at(&trend, 1.0, t, 2000);
            j_derivative(&trend, x_t, t, order)
        };
        for order in 0..3 {
            let h = 1e-4;
            let fd = (j_at(order, 0.4 + h) - j_at(order, 0.4 - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, j_at(order + 1, 0.4), epsilon = 1e-5);
        }
    }

    #[test]
    fn csv_round_trip() {
        let cfg = config(0.3, 1.0, 0.05, 16);
        let path = simulate(&cfg, 9).unwrap();
        let text = path.to_csv_string();
        assert!(text.starts_with(PATH_CSV_HEADER));
        assert_eq!(text.lines().count(), 18);
        assert!(text.lines().last().unwrap().ends_with(','));
        let back = SdePath::read_csv(text.as_bytes(), 0.05, true).unwrap();
        assert_eq!(back.x, path.x);
        assert_eq!(back.y_increments, path.y_increments);
        assert_eq!(back.indicator_a, path.indicator_a);
    }

    #[test]
    fn csv_missing_columns() {
        let text = "t,X\n0,1\n0.5,1.1\n1,1.2\n";
        assert!(SdePath::<f64>::read_csv(text.as_bytes(), 0.1, false).is_ok());
        match SdePath::<f64>::read_csv(text.as_bytes(), 0.1, true) {
            Err(Error::Schema(msg)) => assert!(msg.contains("indicator_A"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn lemma21b_requires_enough_replications() {
        let cfg = config(0.0, 1.0, 0.1, 16);
        assert!(lemma21b_check(&cfg, 99, 1).is_err());
    }
}
