//! Experiment configuration: a JSON document whose fields can be overridden
//! from the command line.

use std::path::{Path, PathBuf};

use framedisc_core::discretizer::{InverseMethod, SampleRule, SamplingPlan, select_samples};
use framedisc_core::quadrature::MAX_POINTS;
use framedisc_core::{
    build_pou, refine_until, uniform_covering_axes, AxisWindow, Covering, Exponent, FrameModel, GaborParams, Kernel,
    OscReport, PhaseFunction, PhaseRule, PipelineOptions, PouKind, QuadratureSpace, RefineOptions, Weight2D,
    WeightedLp,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gabor {
        n_time: usize,
        n_freq: usize,
        window_width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signal_len: Option<usize>,
    },
    RandomSmooth {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_points: Option<usize>,
        /// Quadrature space JSON replacing the default `[0, 1)` grid.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_file: Option<PathBuf>,
        smoothness: f64,
        #[serde(default)]
        seed: u64,
    },
    Orthonormal {
        d: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `w = 1`.
    #[default]
    One,
    /// `w(x) = exp(rate |x|_1)`.
    Exp,
    /// `w(x) = (1 + |x|_1)^rate`.
    Poly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub rule: WeightRule,
    #[serde(default)]
    pub rate: f64,
    #[serde(default = "default_p")]
    pub p: Exponent,
}

fn default_p() -> Exponent {
    Exponent::Finite(2.0)
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self {
            rule: WeightRule::One,
            rate: 0.0,
            p: default_p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoveringKind {
    #[default]
    Windows,
    Singletons,
    Sets,
}

/// A scalar applied to every axis, or one value per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis {
    All(f64),
    Each(Vec<f64>),
}

impl PerAxis {
    fn expand(&self, dim: usize) -> Result<Vec<f64>, CliError> {
        match self {
            PerAxis::All(v) => Ok(vec![*v; dim]),
            PerAxis::Each(v) if v.len() == dim => Ok(v.clone()),
            PerAxis::Each(v) => Err(CliError::Config(format!("expected {dim} per-axis values, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringSpec {
    #[serde(default)]
    pub kind: CoveringKind,
    /// Window widths in grid coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<PerAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<PerAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_pou")]
    pub pou: PouKind,
    #[serde(default = "default_rule")]
    pub sample_rule: SampleRule,
}

fn default_pou() -> PouKind {
    PouKind::Flat
}

fn default_rule() -> SampleRule {
    SampleRule::Medoid
}

impl Default for CoveringSpec {
    fn default() -> Self {
        Self {
            kind: CoveringKind::Singletons,
            width: None,
            overlap: None,
            sets: None,
            pou: default_pou(),
            sample_rule: default_rule(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSpec {
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_true")]
    pub require_58: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_widths: Option<Vec<f64>>,
}

fn default_rounds() -> usize {
    32
}

fn default_true() -> bool {
    true
}

impl Default for RefineSpec {
    fn default() -> Self {
        Self {
            max_rounds: default_rounds(),
            require_58: true,
            initial_widths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub neumann_tol: f64,
    pub neumann_max_terms: usize,
    pub reconstruction: f64,
    pub duality: f64,
    pub agreement: f64,
    pub identity: f64,
    pub power_max_iter: usize,
    pub power_rel_tol: f64,
    pub permutations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let o = PipelineOptions::default();
        Self {
            neumann_tol: o.neumann_tol,
            neumann_max_terms: o.neumann_max_terms,
            reconstruction: o.reconstruction_tol,
            duality: o.duality_tol,
            agreement: o.agreement_tol,
            identity: o.identity_tol,
            power_max_iter: o.power_max_iter,
            power_rel_tol: o.power_rel_tol,
            permutations: o.permutations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default)]
    pub covering: CoveringSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: PhaseRule,
    /// Unimodular table for `gamma = "user_table"`, as kernel JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_table: Option<PathBuf>,
    #[serde(default = "default_method")]
    pub method: InverseMethod,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_schema() -> String {
    SCHEMA_VERSION.to_string()
}

fn default_delta() -> f64 {
    0.25
}

fn default_gamma() -> PhaseRule {
    PhaseRule::KernelPhase
}

fn default_method() -> InverseMethod {
    InverseMethod::Neumann
}

fn default_trials() -> usize {
    50
}

/// Model, weight and covering materialized from a config.
pub struct Experiment {
    pub model: FrameModel,
    pub y: WeightedLp,
    pub weight: Weight2D,
    pub gamma: PhaseFunction,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Range and consistency checks that do not need the model.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {:?}", self.schema_version));
        }
        match &self.model {
            ModelSpec::Gabor {
                n_time,
                n_freq,
                window_width,
                signal_len,
            } => {
                if *n_time == 0 || *n_freq == 0 || !(*window_width > 0.0) || !window_width.is_finite() {
                    return bad("gabor model needs positive n_time, n_freq and window_width".into());
                }
                if n_time * n_freq > MAX_POINTS {
                    return bad(format!("grid of {} points exceeds the cap of {MAX_POINTS}", n_time * n_freq));
                }
                if signal_len.is_some_and(|d| d == 0) {
                    return bad("signal_len must be positive".into());
                }
            }
            ModelSpec::RandomSmooth {
                d,
                n_points,
                grid_file,
                smoothness,
                ..
            } => {
                if *d == 0 || !(*smoothness > 0.0) || !smoothness.is_finite() {
                    return bad("random_smooth model needs positive d and smoothness".into());
                }
                match (n_points, grid_file) {
                    (Some(_), Some(_)) => return bad("give either n_points or grid_file, not both".into()),
                    (None, None) => return bad("random_smooth model needs n_points or grid_file".into()),
                    (Some(n), None) if *n > MAX_POINTS || *n < *d => {
                        return bad(format!("n_points must lie in [d, {MAX_POINTS}], got {n}"))
                    }
                    _ => {}
                }
            }
            ModelSpec::Orthonormal { d } => {
                if *d == 0 || *d > MAX_POINTS {
                    return bad(format!("orthonormal model needs 0 < d <= {MAX_POINTS}"));
                }
            }
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return bad(format!("delta must be a finite nonnegative number, got {}", self.delta));
        }
        if !self.weight.rate.is_finite() {
            return bad("weight rate must be finite".into());
        }
        if self.weight.rule == WeightRule::Exp && self.weight.rate.abs() > 50.0 {
            return bad("exponential weight rate is capped at 50".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        match self.covering.kind {
            CoveringKind::Windows if self.covering.width.is_none() && self.refine.is_none() => {
                return bad("windows covering needs a width".into())
            }
            CoveringKind::Sets if self.covering.sets.is_none() && self.refine.is_none() => {
                return bad("sets covering needs explicit sets".into())
            }
            _ => {}
        }
        if self.gamma == PhaseRule::UserTable && self.gamma_table.is_none() {
            return bad("gamma user_table needs gamma_table".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("neumann_tol", t.neumann_tol),
            ("reconstruction", t.reconstruction),
            ("duality", t.duality),
            ("agreement", t.agreement),
            ("identity", t.identity),
            ("power_rel_tol", t.power_rel_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        if t.neumann_max_terms == 0 || t.power_max_iter == 0 {
            return bad("iteration caps must be positive".into());
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<FrameModel, CliError> {
        let model = match &self.model {
            ModelSpec::Gabor {
                n_time,
                n_freq,
                window_width,
                signal_len,
            } => FrameModel::gabor(GaborParams {
                n_time: *n_time,
                n_freq: *n_freq,
                window_width: *window_width,
                signal_len: *signal_len,
            }),
            ModelSpec::RandomSmooth {
                d,
                n_points,
                grid_file,
                smoothness,
                seed,
            } => match (n_points, grid_file) {
                (Some(n), _) => FrameModel::random_smooth(*d, *n, *smoothness, *seed),
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                    let space = QuadratureSpace::from_json(&text).map_err(CliError::config)?;
                    FrameModel::random_smooth_on(space, *d, *smoothness, *seed)
                }
                (None, None) => unreachable!("checked in validate"),
            },
            ModelSpec::Orthonormal { d } => FrameModel::orthonormal(*d),
        };
        model.map_err(CliError::from_core)
    }

    pub fn build_space_y(&self, space: &QuadratureSpace) -> Result<WeightedLp, CliError> {
        let w: Vec<f64> = space
            .points()
            .iter()
            .map(|pt| {
                let r: f64 = pt.iter().map(|c| c.abs()).sum();
                match self.weight.rule {
                    WeightRule::One => 1.0,
                    WeightRule::Exp => (self.weight.rate * r).exp(),
                    WeightRule::Poly => (1.0 + r).powf(self.weight.rate),
                }
            })
            .collect();
        WeightedLp::new(self.weight.p, w).map_err(CliError::config)
    }

    pub fn build_gamma(&self, model: &FrameModel) -> Result<PhaseFunction, CliError> {
        match self.gamma {
            PhaseRule::UserTable => {
                let path = self.gamma_table.as_ref().expect("checked in validate");
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let table = Kernel::from_json(&text).map_err(CliError::config)?;
                if table.size() != model.len() {
                    return Err(CliError::Config(format!(
                        "gamma table has {} points, grid has {}",
                        table.size(),
                        model.len()
                    )));
                }
                PhaseFunction::user_table(table.into_matrix()).map_err(CliError::config)
            }
            rule => PhaseFunction::for_rule(rule, model).map_err(CliError::from_core),
        }
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        self.validate()?;
        let model = self.build_model()?;
        let y = self.build_space_y(model.space())?;
        let weight = y.associated_weight(0).map_err(CliError::config)?;
        let gamma = self.build_gamma(&model)?;
        Ok(Experiment { model, y, weight, gamma })
    }

    /// The configured covering; in refine mode the result of the search
    /// together with its report.
    pub fn build_covering(&self, exp: &Experiment) -> Result<(Covering, Option<OscReport>), CliError> {
        let space = exp.model.space();
        if let Some(refine) = &self.refine {
            let opts = RefineOptions {
                delta: self.delta,
                gamma: self.gamma,
                max_rounds: refine.max_rounds,
                initial_widths: refine.initial_widths.clone(),
                require_58: refine.require_58,
            };
            if self.gamma == PhaseRule::UserTable {
                return Err(CliError::Config("refine mode supports constant_one and kernel_phase only".into()));
            }
            let (cov, report) = refine_until(&exp.model, &exp.weight, &opts).map_err(CliError::from_core)?;
            return Ok((cov, Some(report)));
        }
        let cov = match self.covering.kind {
            CoveringKind::Singletons => Covering::singletons(space.len()),
            CoveringKind::Sets => Covering::new(self.covering.sets.clone().expect("checked"), space.len())
                .map_err(CliError::config)?,
            CoveringKind::Windows => {
                let dim = space.dim();
                let widths = self.covering.width.as_ref().expect("checked").expand(dim)?;
                let overlaps = match &self.covering.overlap {
                    Some(o) => o.expand(dim)?,
                    None => vec![0.0; dim],
                };
                let axes: Vec<AxisWindow> = widths
                    .into_iter()
                    .zip(overlaps)
                    .map(|(width, overlap)| AxisWindow { width, overlap })
                    .collect();
                uniform_covering_axes(space, &axes).map_err(CliError::config)?
            }
        };
        Ok((cov, None))
    }

    pub fn build_plan(&self, exp: &Experiment, cov: &Covering) -> Result<SamplingPlan, CliError> {
        let space = exp.model.space();
        let pou = build_pou(cov, space, self.covering.pou).map_err(CliError::config)?;
        select_samples(cov, &pou, space, self.covering.sample_rule).map_err(CliError::from_core)
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        let t = &self.tolerances;
        PipelineOptions {
            delta: self.delta,
            method: self.method,
            neumann_tol: t.neumann_tol,
            neumann_max_terms: t.neumann_max_terms,
            seed: self.seed,
            trials: self.trials,
            reconstruction_tol: t.reconstruction,
            duality_tol: t.duality,
            agreement_tol: t.agreement,
            identity_tol: t.identity,
            power_max_iter: t.power_max_iter,
            power_rel_tol: t.power_rel_tol,
            permutations: t.permutations,
        }
    }
}
