use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linmult"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const MINIMAL: &str = r#"{
  "model": { "kind": "fractional_bm", "hurst": 0.7 },
  "trend": { "form": { "family": "constant", "value": 0.5 }, "bound_L": 0.5 },
  "sde": { "x0": 1.0, "epsilon": 0.1, "T": 1.0, "n_steps": 200 },
  "experiment": { "target": "lemma21", "epsilons": [0.1], "n_reps": 100, "seed": 3 }
}"#;

#[test]
fn simulate_writes_one_row_per_node_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 202);
    assert_eq!(text.lines().next().unwrap(), "t,X,x_ode,G,indicator_A,Y_increment");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "4"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn out_of_range_hurst_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &MINIMAL.replace("0.7", "1.5"));
    let out = dir.path().join("p.csv");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.hurst out of range (0,1)"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &MINIMAL.replace("\"x0\"", "\"x_0\""));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("p.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sde") && err.contains("x_0"), "{err}");
}

#[test]
fn noise_free_round_trip_reproduces_the_estimator_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("estimate_noise_free.json");
    let path = dir.path().join("p.csv");
    let curve = dir.path().join("curve.csv");
    assert!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]).status.success());
    let o = run(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--input",
        path.to_str().unwrap(),
        "--out",
        curve.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("# {"));
    let values: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 21);
    assert!(values.iter().all(|v| (v - 0.5).abs() <= 0.02));
    let hi = values.iter().copied().fold(f64::MIN, f64::max);
    let lo = values.iter().copied().fold(f64::MAX, f64::min);
    assert!(hi - lo <= 0.02);
}

#[test]
fn theta_target_needs_observation_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    fs::write(&input, "t,X,x_ode,G\n0,1,1,0\n0.5,1.2,1.2,0\n1,1.6,1.6,0\n").unwrap();
    let o = run(&[
        "estimate",
        "--config",
        configs().join("estimate_noise_free.json").to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("indicator_A"));
}

#[test]
fn single_point_curve_and_infeasible_window() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(configs().join("estimate_noise_free.json")).unwrap();
    let one = write_config(dir.path(), "one.json", &base.replace("\"n_eval\": 21", "\"n_eval\": 1"));
    let wide = write_config(dir.path(), "wide.json", &base.replace("\"phi\": 0.05", "\"phi\": 0.6"));
    let path = dir.path().join("p.csv");
    run(&["simulate", "--config", one.to_str().unwrap(), "--out", path.to_str().unwrap()]);

    let curve = dir.path().join("c.csv");
    let args = |cfg: &Path| {
        vec![
            "estimate".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--input".into(),
            path.to_str().unwrap().into(),
            "--out".into(),
            curve.to_str().unwrap().into(),
        ]
    };
    assert!(bin().args(args(&one)).status().unwrap().success());
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 3);

    let o = bin().args(args(&wide)).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lemma_experiment_on_theta_zero_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "experiment",
        "--config",
        configs().join("lemma21.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
    assert!(out.join("report.csv").exists());
    assert!(!out.join("clt_samples.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed_base"], 99);
    assert_eq!(manifest["seed_source"], "command_line");
    assert_eq!(manifest["passed"], true);
}

#[test]
fn coarse_explicit_bandwidth_is_refused_without_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
  "model": { "kind": "fractional_bm", "hurst": 0.6 },
  "trend": { "form": { "family": "constant", "value": 0.5 }, "bound_L": 0.5 },
  "sde": { "x0": 1.0, "epsilon": 0.1, "T": 1.0, "n_steps": 64 },
  "kernel": { "name": "epanechnikov" },
  "estimator": { "rule": { "kind": "explicit", "phi": 0.1 } },
  "experiment": { "target": "consistency", "epsilons": [0.1], "n_reps": 5 }
}"#,
    );
    let out = dir.path().join("run");
    let o = run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("φ/20"));
    assert!(!out.join("report.csv").exists());

    let o = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--override-resolution",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiment_outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(configs().join("clt.json")).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &base.replace("\"n_steps\": 2048", "\"n_steps\": 512").replace("\"n_reps\": 500", "\"n_reps\": 150"),
    );
    let mut files = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = run(&[
            "experiment",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        files.push((fs::read(out.join("report.csv")).unwrap(), fs::read(out.join("clt_samples.csv")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let samples = String::from_utf8(files[0].1.clone()).unwrap();
    assert_eq!(samples.lines().count(), 151);
}

#[test]
fn kernels_verify_prints_one_report_per_kernel() {
    let o = run(&["kernels", "verify"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 8);
    for line in stdout.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["a2_ok"], true);
    }
    let o = run(&["kernels", "verify", "order:4", "gaussian"]);
    assert_eq!(o.status.code(), Some(2));
}
