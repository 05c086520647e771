use linmult::estimators::{estimate_j, BandwidthRule, EstimatorConfig};
use linmult::gp_cov::{covariance_matrix, CovarianceModel, GaussianPath, GridSpec};
use linmult::kernels::{build_higher_order, builtin, moment};
use linmult::mc_harness::{
    clt_theory_mean, run_experiment, ExperimentPlan, Target, CLT_CSV_HEADER, REPORT_CSV_HEADER,
};
use linmult::sde_sim::{SdeConfig, Simulator, TrendFunction};

fn sde(theta: f64, hurst: f64, horizon: f64, n: usize) -> SdeConfig<f64> {
    SdeConfig::new(
        1.0,
        0.1,
        TrendFunction::constant(theta),
        CovarianceModel::fractional(hurst).unwrap(),
        GridSpec::new(horizon, n).unwrap(),
    )
    .unwrap()
}

fn plan(target: Target, rule: BandwidthRule<f64>, epsilons: Vec<f64>, n_reps: usize) -> ExperimentPlan {
    ExperimentPlan::new(
        target,
        sde(0.5, 0.7, 1.0, 512),
        builtin("epanechnikov").unwrap(),
        rule,
        epsilons,
        n_reps,
        2024,
    )
}

#[test]
fn single_level_rate_run_has_one_row_and_no_gate() {
    let report = run_experiment(&plan(Target::RateJ, BandwidthRule::RateK { k: 1 }, vec![0.1], 50)).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.gates.is_empty());
    let row = &report.rows[0];
    assert!((row.phi.unwrap() - 0.1f64.sqrt()).abs() < 1e-15);
    assert!(row.resolution_ok);
    assert_eq!(row.points.len(), 21);
    assert!(report.report_csv().starts_with(REPORT_CSV_HEADER));
}

#[test]
fn tiny_epsilon_ratio_is_flagged_unreliable() {
    let mut p = plan(Target::RateJ, BandwidthRule::Explicit { phi: 0.1 }, vec![0.1, 1e-12], 20);
    p.target = Target::RateJ;
    // RateJ insists on the rate rule; the guard is about ε versus Δ.
    assert!(run_experiment(&p).is_err());
    p.rule = BandwidthRule::RateK { k: 1 };
    p.allow_coarse_grid = true;
    let report = run_experiment(&p).unwrap();
    assert!(report.rows[0].ratio_reliable);
    assert!(!report.rows[1].ratio_reliable);
}

#[test]
fn coarse_grid_without_override_names_the_resolution_rule() {
    let mut p = plan(Target::Consistency, BandwidthRule::Explicit { phi: 0.03 }, vec![0.1], 10);
    let err = run_experiment(&p).unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains("φ/20"), "{err}");
    p.allow_coarse_grid = true;
    assert!(!run_experiment(&p).unwrap().rows[0].resolution_ok);
}

#[test]
fn consistency_run_is_reproducible_and_thread_independent() {
    let mut p = plan(Target::Consistency, BandwidthRule::RateK { k: 1 }, vec![0.2, 0.1], 40);
    p.threads = Some(1);
    let a = run_experiment(&p).unwrap();
    let b = run_experiment(&p).unwrap();
    p.threads = Some(4);
    let c = run_experiment(&p).unwrap();
    assert_eq!(a.report_csv(), b.report_csv());
    assert_eq!(a.report_csv(), c.report_csv());
    assert_eq!(a.gates, c.gates);
}

#[test]
fn single_replication_has_no_standard_errors() {
    let report = run_experiment(&plan(Target::Consistency, BandwidthRule::RateK { k: 1 }, vec![0.2, 0.1], 1)).unwrap();
    assert!(report.rows.iter().all(|r| r.sup_risk.unwrap().se.is_none()));
    assert!(!report.notes.is_empty());
    assert!(report.gates[0].detail.contains("unavailable"));
}

#[test]
fn plan_validation() {
    let ok = plan(Target::Consistency, BandwidthRule::RateK { k: 1 }, vec![0.2, 0.1], 10);
    let mut bad = ok.clone();
    bad.epsilons = vec![0.1, 0.2];
    assert!(bad.validate().is_err());
    let mut bad = ok.clone();
    bad.epsilons = vec![1.5];
    assert!(bad.validate().is_err());
    let mut bad = ok.clone();
    bad.target = Target::Clt;
    bad.eval_points = Some(vec![0.5]);
    assert!(bad.validate().is_err(), "n_reps < 100 for clt");
    let mut bad = ok.clone();
    bad.target = Target::RateTheta;
    assert!(bad.validate().is_err(), "rate_theta needs rate_rho");
}

#[test]
fn lemma_run_on_theta_zero_holds_strictly() {
    let mut p = plan(Target::Lemma21, BandwidthRule::RateK { k: 1 }, vec![0.2, 0.1, 0.05], 200);
    p.sde = sde(0.0, 0.6, 1.0, 256);
    let report = run_experiment(&p).unwrap();
    assert!(report.passed());
    for row in &report.rows {
        let l = row.lemma.as_ref().unwrap();
        assert!(l.mean_sup_gap.mean < l.bound.mean);
    }
    // Same seeds per level index do not match across levels, but the bound is linear in ε
    // up to Monte Carlo noise in E sup|G|.
    let b: Vec<f64> = report.rows.iter().map(|r| r.lemma.as_ref().unwrap().bound.mean).collect();
    assert!((b[0] / b[1] - 2.0).abs() < 0.3 && (b[1] / b[2] - 2.0).abs() < 0.3);
}

#[test]
fn clt_mean_oracle_for_constant_multiplier() {
    let mut p = plan(Target::Clt, BandwidthRule::RateK { k: 1 }, vec![0.05], 100);
    p.eval_points = Some(vec![0.5]);
    let m = clt_theory_mean(&p, 1, 0.5).unwrap();
    // J'' = θ³ x_t, epanechnikov second moment 1/5.
    let oracle = 0.125 * 0.25f64.exp() / 2.0 * 0.2;
    assert!((m - oracle).abs() < 1e-9, "{m} vs {oracle}");
    p.kernel = build_higher_order(2, -1.0, 1.0).unwrap();
    assert!(run_experiment(&p).unwrap_err().is_config());
}

#[test]
fn clt_large_epsilon_is_flagged_pre_asymptotic() {
    let mut p = plan(Target::Clt, BandwidthRule::RateK { k: 1 }, vec![0.5], 200);
    p.sde = sde(2.0, 0.5, 2.0, 1024);
    p.eval_points = Some(vec![1.0]);
    let report = run_experiment(&p).unwrap();
    let clt = report.rows[0].clt.as_ref().unwrap();
    assert!(clt.pre_asymptotic);
    assert!(report.clt_samples[0].1.iter().all(|w| w.is_finite()));
    assert!(report.clt_csv().unwrap().starts_with(CLT_CSV_HEADER));
}

/// `φ^{−2}(Ĵ − J)` is affine in the driver, so its exact variance is `vᵀ Σ v`.
fn exact_normalized_variance(cfg: &SdeConfig<f64>, est: &EstimatorConfig<f64>, t: f64) -> f64 {
    let sim = Simulator::new(cfg.clone()).unwrap();
    let n = cfg.grid.n_steps();
    let noise = |j: Option<usize>| GaussianPath {
        grid: cfg.grid,
        values: (0..=n).map(|i| if Some(i) == j { 1.0 } else { 0.0 }).collect(),
        seed: 0,
    };
    let base = estimate_j(&sim.simulate_with_noise(noise(None)).unwrap(), est, t).unwrap();
    let v: Vec<f64> = (1..=n)
        .map(|j| estimate_j(&sim.simulate_with_noise(noise(Some(j))).unwrap(), est, t).unwrap() - base)
        .collect();
    let sigma = covariance_matrix(&cfg.model, &cfg.grid).unwrap();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += v[i] * sigma.get(i, j) * v[j];
        }
    }
    q / est.phi().powi(4)
}

#[test]
fn clt_sample_variance_matches_exact_variance_of_the_linear_functional() {
    let eps = 0.05;
    let mut p = plan(Target::Clt, BandwidthRule::RateK { k: 1 }, vec![eps], 500);
    p.sde = sde(0.5, 0.5, 1.0, 512).with_epsilon(eps).unwrap();
    p.eval_points = Some(vec![0.5]);
    let report = run_experiment(&p).unwrap();
    let clt = report.rows[0].clt.as_ref().unwrap();

    let est = EstimatorConfig::new(p.kernel.clone(), eps, p.rule, 1.0).unwrap();
    let exact = exact_normalized_variance(&p.sde, &est, 0.5);
    // Sample variance of 500 Gaussian draws has relative SE sqrt(2/499) ≈ 6.3%.
    assert!((clt.variance / exact - 1.0).abs() < 0.25, "{} vs {exact}", clt.variance);
    // Kernel-noise term ε²φ^{-5}∫K², drift coupling θεG(t)/φ² and their covariance.
    let (theta, t, phi) = (0.5, 0.5, est.phi());
    let approx = eps * eps / phi.powi(4) * (0.6 / phi + 2.0 * theta * 0.5 + theta * theta * t);
    assert!((exact / approx - 1.0).abs() < 0.05, "{exact} vs {approx}");
    assert!((moment(&p.kernel, 2) - 0.2).abs() < 1e-12);
}
