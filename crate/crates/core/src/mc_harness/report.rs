use std::fmt::Write as _;

use serde::Serialize;

use super::stats::Stat;
use super::{Target, Tolerances};

pub const REPORT_CSV_HEADER: &str = "epsilon,phi,delta,t,stat,value,se";
pub const CLT_CSV_HEADER: &str = "epsilon,rep,normalized_error";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStat {
    pub t: f64,
    pub mean_abs_error: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaStat {
    pub mean_sup_gap: Stat,
    pub bound: Stat,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltStat {
    pub t: f64,
    pub mean: Stat,
    pub theory_mean: f64,
    pub variance: f64,
    pub theory_variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ecdf_distance: f64,
    pub ecdf_threshold: f64,
    pub pre_asymptotic: bool,
}

/// Everything measured at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// Bandwidth; `None` for experiments that do not estimate.
    pub phi: Option<f64>,
    pub delta: f64,
    pub resolution_ok: bool,
    pub window: (f64, f64),
    pub points: Vec<PointStat>,
    /// Mean over replications of the max over evaluation points.
    pub sup_risk: Option<Stat>,
    pub ratio: Option<f64>,
    /// `ε ≥ 10 Δ`; below that the ratio mostly measures discretization.
    pub ratio_reliable: bool,
    /// Probability that the global event `A` fails.
    pub p_a_complement: Option<Stat>,
    pub lemma: Option<LemmaStat>,
    pub clt: Option<CltStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub target: Target,
    pub seed_base: u64,
    pub seed_scheme: &'static str,
    pub n_reps: usize,
    pub rows: Vec<EpsilonRow>,
    #[serde(skip)]
    pub clt_samples: Vec<(f64, Vec<f64>)>,
    pub gates: Vec<GateOutcome>,
    pub notes: Vec<String>,
    pub tolerances: Tolerances,
    pub wall_time_secs: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    /// Tidy long-format table: one row per `(ε, t, statistic)`.
    pub fn report_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPORT_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let mut line = |t: Option<f64>, stat: &str, value: f64, se: Option<f64>| {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.epsilon,
                    fmt_opt(row.phi),
                    row.delta,
                    fmt_opt(t),
                    stat,
                    value,
                    fmt_opt(se)
                )
                .expect("write to string");
            };
            line(None, "resolution_ok", f64::from(u8::from(row.resolution_ok)), None);
            for p in &row.points {
                line(Some(p.t), "mean_abs_error", p.mean_abs_error.mean, p.mean_abs_error.se);
            }
            if let Some(s) = row.sup_risk {
                line(None, "sup_risk", s.mean, s.se);
            }
            if let Some(r) = row.ratio {
                line(None, "ratio", r, row.sup_risk.and_then(|s| s.se).map(|se| se / row.epsilon));
                line(None, "ratio_reliable", f64::from(u8::from(row.ratio_reliable)), None);
            }
            if let Some(p) = row.p_a_complement {
                line(None, "p_a_complement", p.mean, p.se);
            }
            if let Some(l) = &row.lemma {
                line(None, "mean_sup_gap", l.mean_sup_gap.mean, l.mean_sup_gap.se);
                line(None, "bound", l.bound.mean, l.bound.se);
                line(None, "slack", l.slack, None);
                line(None, "lemma_holds", f64::from(u8::from(l.holds)), None);
            }
            if let Some(c) = &row.clt {
                let t = Some(c.t);
                line(t, "clt_mean", c.mean.mean, c.mean.se);
                line(t, "clt_mean_theory", c.theory_mean, None);
                line(t, "clt_variance", c.variance, None);
                line(t, "clt_variance_theory", c.theory_variance, None);
                line(t, "clt_skewness", c.skewness, None);
                line(t, "clt_excess_kurtosis", c.excess_kurtosis, None);
                line(t, "clt_ecdf_distance", c.ecdf_distance, None);
                line(t, "clt_pre_asymptotic", f64::from(u8::from(c.pre_asymptotic)), None);
            }
        }
        out
    }

    /// One normalized error per row; empty when the target is not CLT.
    pub fn clt_csv(&self) -> Option<String> {
        if self.clt_samples.is_empty() {
            return None;
        }
        let mut out = String::new();
        out.push_str(CLT_CSV_HEADER);
        out.push('\n');
        for (eps, samples) in &self.clt_samples {
            for (rep, w) in samples.iter().enumerate() {
                writeln!(out, "{eps},{rep},{w}").expect("write to string");
            }
        }
        Some(out)
    }

    /// One human-readable line per noise level.
    pub fn summary_lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let mut s = format!("eps={}", r.epsilon);
                if let Some(phi) = r.phi {
                    let _ = write!(s, " phi={phi:.6}");
                }
                if let Some(sr) = r.sup_risk {
                    let _ = write!(s, " sup_risk={:.6e}", sr.mean);
                    match sr.se {
                        Some(se) => {
                            let _ = write!(s, " (se {se:.2e})");
                        }
                        None => s.push_str(" (se n/a)"),
                    }
                }
                if let Some(ratio) = r.ratio {
                    let _ = write!(s, " ratio={ratio:.4}{}", if r.ratio_reliable { "" } else { " [unreliable]" });
                }
                if let Some(p) = r.p_a_complement {
                    let _ = write!(s, " P(A^c)={:.4}", p.mean);
                }
                if let Some(l) = &r.lemma {
                    let _ = write!(
                        s,
                        " gap={:.4e} bound={:.4e} slack={:.2e} holds={}",
                        l.mean_sup_gap.mean, l.bound.mean, l.slack, l.holds
                    );
                }
                if let Some(c) = &r.clt {
                    let _ = write!(
                        s,
                        " clt_mean={:.4} (m={:.4}) var={:.4} (R={:.4}) skew={:.3} exkurt={:.3} ecdf={:.4}{}",
                        c.mean.mean,
                        c.theory_mean,
                        c.variance,
                        c.theory_variance,
                        c.skewness,
                        c.excess_kurtosis,
                        c.ecdf_distance,
                        if c.pre_asymptotic { " [pre-asymptotic]" } else { "" }
                    );
                }
                if !r.resolution_ok {
                    s.push_str(" [coarse grid]");
                }
                s
            })
            .collect()
    }

    /// Report metadata as JSON (everything except the tables).
    pub fn manifest(&self, plan_echo: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "plan": plan_echo,
            "target": self.target,
            "seed_base": self.seed_base,
            "seed_scheme": self.seed_scheme,
            "n_reps": self.n_reps,
            "tolerances": self.tolerances,
            "gates": self.gates,
            "passed": self.passed(),
            "notes": self.notes,
            "wall_time_secs": self.wall_time_secs,
        })
    }
}
