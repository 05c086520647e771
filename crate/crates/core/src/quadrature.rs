//! Gauss–Legendre and composite Simpson rules.

use std::sync::OnceLock;

use crate::scalar::Scalar;

/// Number of Gauss–Legendre nodes used for kernel moments.
pub const KERNEL_QUADRATURE_NODES: usize = 200;

/// Gauss–Legendre rule on [-1, 1]. Nodes and weights are computed in `f64`
/// by Newton iteration on the three-term Legendre recurrence.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Evaluates `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            // Tricomi initial guess for the i-th largest root.
            let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut x = theta.cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            weights[i] = w;
            nodes[n - 1 - i] = -x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared 200-node rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(KERNEL_QUADRATURE_NODES))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<T: Scalar, F: Fn(T) -> T>(&self, a: T, b: T, f: F) -> T {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        let sum: T = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| T::lit(w) * f(mid + half * T::lit(x)))
            .sum();
        sum * half
    }
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<T: Scalar, F: Fn(T) -> T>(a: T, b: T, panels: usize, f: F) -> T {
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / T::from_usize_lossy(n);
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        acc = acc + w * f(a + h * T::from_usize_lossy(i));
    }
    acc * h / T::lit(3.0)
}
