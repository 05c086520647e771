//! Declarative run configuration.

use std::path::Path;

use linmult::estimators::{BandwidthRule, EstimateTarget, EstimatorConfig};
use linmult::gp_cov::{CovarianceKind, CovarianceModel, GridSpec};
use linmult::kernels::{build_higher_order, from_name, KernelFunction};
use linmult::mc_harness::{ExperimentPlan, Target, Tolerances, DEFAULT_EVAL_POINTS};
use linmult::sde_sim::{SdeConfig, Smoothness, TrendFamily, TrendFunction};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    pub trend: Option<TrendSection>,
    pub sde: Option<SdeSection>,
    pub kernel: Option<KernelSection>,
    pub estimator: Option<EstimatorSection>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: CovarianceKind,
    pub hurst: f64,
    /// Only read for the bifractional model.
    #[serde(default)]
    pub bi_exponent: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSection {
    pub form: TrendForm,
    #[serde(rename = "bound_L")]
    pub bound_l: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness: Smoothness<f64>,
}

fn default_smoothness() -> Smoothness<f64> {
    Smoothness::Theta0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrendForm {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Polynomial { coefficients: Vec<f64> },
    Logistic { base: f64, height: f64, rate: f64, midpoint: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    pub x0: f64,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// `uniform`, `triangular`, `epanechnikov` or `order:k`.
    pub name: Option<String>,
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveTarget {
    #[default]
    J,
    Theta,
}

impl From<CurveTarget> for EstimateTarget {
    fn from(t: CurveTarget) -> Self {
        match t {
            CurveTarget::J => EstimateTarget::J,
            CurveTarget::Theta => EstimateTarget::Theta,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub rule: BandwidthRule<f64>,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub target: CurveTarget,
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
}

fn default_n_eval() -> usize {
    DEFAULT_EVAL_POINTS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub target: Target,
    pub epsilons: Vec<f64>,
    pub n_reps: usize,
    #[serde(default)]
    pub eval_points: Option<Vec<f64>>,
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub threads: Option<usize>,
    pub override_resolution: bool,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(e.into_inner().to_string())
        } else {
            CliError::Config(format!("{path}: {}", e.into_inner()))
        }
    })
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("missing section `{name}`")))
}

impl RunConfig {
    pub fn model(&self) -> Result<CovarianceModel<f64>, CliError> {
        let m = section(&self.model, "model")?;
        let model = match m.kind {
            CovarianceKind::FractionalBm => CovarianceModel::fractional(m.hurst),
            CovarianceKind::SubFractionalBm => CovarianceModel::sub_fractional(m.hurst),
            CovarianceKind::BifractionalBm => {
                let k = m
                    .bi_exponent
                    .ok_or_else(|| CliError::Config("model.bi_exponent is required for bifractional_bm".into()))?;
                CovarianceModel::bifractional(m.hurst, k)
            }
            CovarianceKind::Custom => {
                return Err(CliError::Config("model.kind `custom` is only available through the library".into()))
            }
        }?;
        Ok(model)
    }

    pub fn trend(&self) -> Result<TrendFunction<f64>, CliError> {
        let t = section(&self.trend, "trend")?;
        let family = match t.form.clone() {
            TrendForm::Constant { value } => TrendFamily::Constant { value },
            TrendForm::Affine { intercept, slope } => TrendFamily::Affine { intercept, slope },
            TrendForm::Sine { offset, amplitude, frequency, phase } => {
                TrendFamily::Sine { offset, amplitude, frequency, phase }
            }
            TrendForm::Polynomial { coefficients } => TrendFamily::Polynomial { coefficients },
            TrendForm::Logistic { base, height, rate, midpoint } => {
                TrendFamily::Logistic { base, height, rate, midpoint }
            }
        };
        Ok(TrendFunction::new(family, t.bound_l, t.smoothness)?)
    }

    pub fn grid(&self) -> Result<GridSpec<f64>, CliError> {
        let s = section(&self.sde, "sde")?;
        Ok(GridSpec::new(s.horizon, s.n_steps)?)
    }

    pub fn epsilon(&self, ov: &Overrides) -> Result<f64, CliError> {
        Ok(ov.epsilon.unwrap_or(section(&self.sde, "sde")?.epsilon))
    }

    pub fn sde(&self, ov: &Overrides) -> Result<SdeConfig<f64>, CliError> {
        let s = section(&self.sde, "sde")?;
        let model = self.model()?;
        let trend = self.trend()?;
        let grid = self.grid()?;
        Ok(SdeConfig::new(s.x0, self.epsilon(ov)?, trend, model, grid)?)
    }

    pub fn kernel(&self) -> Result<KernelFunction<f64>, CliError> {
        let k = section(&self.kernel, "kernel")?;
        match (&k.name, k.order) {
            (Some(name), None) => Ok(from_name(name)?),
            (None, Some(order)) => Ok(build_higher_order(order, -1.0, 1.0)?),
            _ => Err(CliError::Config("kernel: give exactly one of `name` or `order`".into())),
        }
    }

    pub fn estimator_section(&self) -> Result<&EstimatorSection, CliError> {
        section(&self.estimator, "estimator")
    }

    pub fn estimator(&self, epsilon: f64, horizon: f64, ov: &Overrides) -> Result<EstimatorConfig<f64>, CliError> {
        let e = self.estimator_section()?;
        let mut cfg =
            EstimatorConfig::new(self.kernel()?, epsilon, e.rule, horizon)?.allow_coarse_grid(ov.override_resolution);
        if let Some([c, d]) = e.window {
            cfg = cfg.with_window(c, d)?;
        }
        Ok(cfg)
    }

    pub fn seed(&self, ov: &Overrides) -> u64 {
        ov.seed.or_else(|| self.experiment.as_ref().map(|e| e.seed)).unwrap_or(0)
    }

    pub fn plan(&self, ov: &Overrides) -> Result<ExperimentPlan, CliError> {
        let x = section(&self.experiment, "experiment")?;
        let e = self.estimator_section()?;
        let epsilons = match ov.epsilon {
            Some(eps) => vec![eps],
            None => x.epsilons.clone(),
        };
        let first = *epsilons
            .first()
            .ok_or_else(|| CliError::Config("experiment.epsilons is empty".into()))?;
        let sde = self.sde(&Overrides {
            epsilon: Some(first),
            ..ov.clone()
        })?;
        let mut plan = ExperimentPlan::new(x.target, sde, self.kernel()?, e.rule, epsilons, x.n_reps, self.seed(ov));
        plan.window = e.window.map(|[c, d]| (c, d));
        plan.eval_points = x.eval_points.clone();
        plan.n_eval = x.n_eval;
        plan.threads = ov.threads;
        plan.allow_coarse_grid = ov.override_resolution;
        plan.tolerances = x.tolerances;
        plan.validate()?;
        Ok(plan)
    }
}
