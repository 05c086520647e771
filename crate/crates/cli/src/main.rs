//! `linmult`: simulate small-noise SDEs, estimate the multiplier, run Monte Carlo checks.
//!
//! Exit codes: 0 success, 1 a gate failed, 2 configuration error, 3 numerical error.

mod config;
mod output;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linmult::estimators::estimate_curve;
use linmult::kernels::{build_higher_order, builtin, from_name, verify_conditions, KernelFunction};
use linmult::mc_harness::run_experiment;
use linmult::sde_sim::{SdePath, Simulator};

use config::Overrides;
use output::write_atomic;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
    Gate(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Gate(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Gate(m) => write!(f, "gate failed: {m}"),
        }
    }
}

impl From<linmult::Error> for CliError {
    fn from(e: linmult::Error) -> Self {
        match e {
            linmult::Error::Io(m) => CliError::Io(m),
            e if e.is_config() => CliError::Config(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "linmult", version, about = "Small-noise SDE simulation and kernel estimation of the linear multiplier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed; echoed in outputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `sde.epsilon` (or the experiment's epsilon list).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Worker threads for Monte Carlo replications.
    #[arg(long)]
    threads: Option<usize>,
    /// Proceed even when the grid step exceeds phi/20.
    #[arg(long)]
    override_resolution: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epsilon: self.epsilon,
            threads: self.threads,
            override_resolution: self.override_resolution,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate J or theta on a path CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Path CSV as written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment; writes report.csv, clt_samples.csv and manifest.json.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel utilities.
    Kernels {
        #[command(subcommand)]
        command: KernelCommand,
    },
}

#[derive(Subcommand)]
enum KernelCommand {
    /// Check support, normalization and vanishing moments.
    Verify {
        /// Kernel names (`uniform`, `triangular`, `epanechnikov`, `order:k`); defaults to the built-ins.
        names: Vec<String>,
        /// Read the kernel from a run configuration instead.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("linmult: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { common, out } => simulate(&common, &out),
        Command::Estimate { common, input, out } => estimate(&common, &input, &out),
        Command::Experiment { common, out } => experiment(&common, &out),
        Command::Kernels {
            command: KernelCommand::Verify { names, config },
        } => verify_kernels(&names, config.as_deref()),
    }
}

fn simulate(common: &Common, out: &Path) -> Result<(), CliError> {
    let cfg = config::load(&common.config)?;
    let ov = common.overrides();
    let sde = cfg.sde(&ov)?;
    let seed = cfg.seed(&ov);
    let path = Simulator::new(sde)?.simulate(seed)?;
    write_atomic(out, path.to_csv_string().as_bytes())?;
    eprintln!("wrote {} ({} nodes, seed {seed})", out.display(), path.x.len());
    Ok(())
}

fn estimate(common: &Common, input: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = config::load(&common.config)?;
    let ov = common.overrides();
    let section = cfg.estimator_section()?;
    let target = section.target.into();
    let epsilon = cfg.epsilon(&ov)?;
    let file = fs::File::open(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let require_observation = target == linmult::estimators::EstimateTarget::Theta;
    let path = SdePath::read_csv(BufReader::new(file), epsilon, require_observation)?;
    let est = cfg.estimator(epsilon, path.grid.horizon(), &ov)?;
    let curve = estimate_curve(&path, &est, target, section.n_eval)?;
    write_atomic(out, curve.to_csv_string().as_bytes())?;
    eprintln!("wrote {} ({} points, phi {})", out.display(), curve.values.len(), curve.phi);
    Ok(())
}

fn experiment(common: &Common, out: &Path) -> Result<(), CliError> {
    let cfg = config::load(&common.config)?;
    let ov = common.overrides();
    let plan = cfg.plan(&ov)?;
    let kernel_report = verify_conditions(&plan.kernel);
    let report = run_experiment(&plan)?;

    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_atomic(&out.join("report.csv"), report.report_csv().as_bytes())?;
    if let Some(csv) = report.clt_csv() {
        write_atomic(&out.join("clt_samples.csv"), csv.as_bytes())?;
    }
    let mut manifest = report.manifest(plan.echo());
    manifest["seed_source"] = serde_json::json!(if ov.seed.is_some() { "command_line" } else { "config" });
    manifest["kernel_report"] = serde_json::to_value(&kernel_report).expect("kernel report serializes");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out.join("manifest.json"), text.as_bytes())?;

    for line in report.summary_lines() {
        println!("{line}");
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.gates.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
        Err(CliError::Gate(failed.join(", ")))
    }
}

fn verify_kernels(names: &[String], config: Option<&Path>) -> Result<(), CliError> {
    let mut kernels: Vec<KernelFunction<f64>> = Vec::new();
    if let Some(path) = config {
        kernels.push(config::load(path)?.kernel()?);
    }
    for name in names {
        kernels.push(from_name(name)?);
    }
    if kernels.is_empty() {
        for name in ["uniform", "triangular", "epanechnikov"] {
            kernels.push(builtin(name)?);
        }
        for k in 1..=5 {
            kernels.push(build_higher_order(k, -1.0, 1.0)?);
        }
    }
    let mut all_ok = true;
    for kernel in &kernels {
        let r = verify_conditions(kernel);
        all_ok &= r.a2_ok && r.a3_order >= kernel.order_k();
        println!("{}", serde_json::to_string(&r).expect("kernel report serializes"));
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Gate("kernel conditions not met".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = config::parse(r#"{"sde": {"x0": 1, "epsilon": 0.1, "T": 1, "n_steps": 10, "dt": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("sde"), "{err}");
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn domain_errors_map_to_config_exit_code() {
        let cfg: config::RunConfig =
            config::parse(r#"{"model": {"kind": "fractional_bm", "hurst": 1.5}}"#).unwrap();
        let err = cfg.model().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("model.hurst out of range (0,1)"));
    }
}
