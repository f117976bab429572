//! Phase functions, the generalized oscillation kernel and the
//! certification conditions built on its `A_m` norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covering::{uniform_covering_axes, AxisWindow, Covering};
use crate::error::{check_len, Error, Result};
use crate::frame::FrameModel;
use crate::kernel::{Kernel, Weight2D};
use crate::linalg::CMatrix;

/// Modulus threshold below which the kernel phase falls back to 1.
pub const PHASE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRule {
    ConstantOne,
    KernelPhase,
    UserTable,
}

impl std::str::FromStr for PhaseRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_one" | "one" => Ok(Self::ConstantOne),
            "kernel_phase" | "kernel" => Ok(Self::KernelPhase),
            "user_table" => Ok(Self::UserTable),
            other => Err(Error::InvalidInput(format!("unknown phase rule {other:?}"))),
        }
    }
}

/// Unimodular `Gamma(y, z)` on `X x X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFunction {
    rule: PhaseRule,
    table: Option<CMatrix>,
}

impl PhaseFunction {
    pub fn constant_one() -> Self {
        Self {
            rule: PhaseRule::ConstantOne,
            table: None,
        }
    }

    /// Dense table, checked to be unimodular to 1e-14.
    pub fn user_table(table: CMatrix) -> Result<Self> {
        if table.nrows() != table.ncols() {
            return Err(Error::InvalidInput("phase table must be square".into()));
        }
        if table.iter().any(|z| (z.norm() - 1.0).abs() > 1e-14) {
            return Err(Error::InvalidInput("phase table is not unimodular".into()));
        }
        Ok(Self {
            rule: PhaseRule::UserTable,
            table: Some(table),
        })
    }

    pub fn rule(&self) -> PhaseRule {
        self.rule
    }

    pub fn get(&self, y: usize, z: usize) -> Complex64 {
        match &self.table {
            Some(t) => t[(y, z)],
            None => Complex64::new(1.0, 0.0),
        }
    }

    /// Builds the phase for a rule; `UserTable` needs [`PhaseFunction::user_table`].
    pub fn for_rule(rule: PhaseRule, model: &FrameModel) -> Result<Self> {
        match rule {
            PhaseRule::ConstantOne => Ok(Self::constant_one()),
            PhaseRule::KernelPhase => Ok(kernel_phase(model)),
            PhaseRule::UserTable => Err(Error::InvalidInput("user_table phase needs an explicit table".into())),
        }
    }
}

/// `Gamma(y,z) = R(z,y) / |R(z,y)|`, or 1 where `|R(z,y)| <= 1e-12`.
pub fn kernel_phase(model: &FrameModel) -> PhaseFunction {
    let r = model.kernel();
    let n = r.size();
    let table = CMatrix::from_fn(n, n, |y, z| {
        let v = r.get(z, y);
        let a = v.norm();
        if a > PHASE_EPS {
            v / a
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    PhaseFunction {
        rule: PhaseRule::KernelPhase,
        table: Some(table),
    }
}

/// `osc(x,y) = max_{z in Q_y} |R(x,y) - Gamma(y,z) R(x,z)|` by enumeration.
pub fn osc_kernel(model: &FrameModel, cov: &Covering, gamma: &PhaseFunction) -> Result<Kernel> {
    let r = model.kernel().matrix();
    let n = r.nrows();
    check_len("covering vs model", n, cov.n_points())?;
    if let Some(t) = &gamma.table {
        check_len("phase table vs model", n, t.nrows())?;
    }
    let mut out = CMatrix::zeros(n, n);
    for y in 0..n {
        let ry = r.column(y);
        let mut col = vec![0.0f64; n];
        for z in cov.q_neighborhood(y) {
            let g = gamma.get(y, z);
            let rz = r.column(z);
            for x in 0..n {
                let d = (ry[x] - g * rz[x]).norm();
                if d > col[x] {
                    col[x] = d;
                }
            }
        }
        for (x, v) in col.into_iter().enumerate() {
            out[(x, y)] = Complex64::new(v, 0.0);
        }
    }
    Kernel::new(out)
}

/// `sigma = max{C_{m,U} ||R||, ||R|| + delta}`.
pub fn sigma(delta: f64, r_norm: f64, c_mu: f64) -> f64 {
    (c_mu * r_norm).max(r_norm + delta)
}

/// Left-hand side of the certification condition
/// `delta (||R|| + max{C_{m,U} ||R||, ||R|| + delta}) <= 1`.
pub fn smallness_lhs(delta: f64, r_norm: f64, c_mu: f64) -> f64 {
    delta * (r_norm + sigma(delta, r_norm, c_mu))
}

/// Oscillation analysis of one covering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscReport {
    pub osc_norm: f64,
    pub delta: f64,
    pub sigma: f64,
    /// `sigma` with `||osc||` in place of `delta`.
    pub sigma_sharp: f64,
    #[serde(rename = "R_norm")]
    pub r_norm: f64,
    #[serde(rename = "C_mU")]
    pub c_mu: f64,
    pub smallness_lhs: f64,
    #[serde(rename = "holds_D")]
    pub holds_d: bool,
    pub holds_58: bool,
    pub covering_id: String,
    pub n_sets: usize,
    pub gamma: PhaseRule,
    #[serde(skip)]
    pub osc: Option<Kernel>,
}

impl OscReport {
    /// Assembles the report from the computed norms.
    pub fn from_norms(osc_norm: f64, delta: f64, r_norm: f64, c_mu: f64) -> Self {
        let lhs = smallness_lhs(delta, r_norm, c_mu);
        Self {
            osc_norm,
            delta,
            sigma: sigma(delta, r_norm, c_mu),
            sigma_sharp: sigma(osc_norm, r_norm, c_mu),
            r_norm,
            c_mu,
            smallness_lhs: lhs,
            holds_d: osc_norm < delta,
            holds_58: lhs <= 1.0,
            covering_id: String::new(),
            n_sets: 0,
            gamma: PhaseRule::ConstantOne,
            osc: None,
        }
    }

    /// Both conditions hold.
    pub fn certified(&self) -> bool {
        self.holds_d && self.holds_58
    }

    /// Nominal contraction bound `delta (||R|| + sigma)`.
    pub fn contraction_bound(&self) -> f64 {
        self.delta * (self.r_norm + self.sigma)
    }

    /// `||osc|| (||R|| + sigma_sharp)`, valid without reference to `delta`.
    pub fn sharp_contraction_bound(&self) -> f64 {
        self.osc_norm * (self.r_norm + self.sigma_sharp)
    }
}

/// Evaluates property `D[delta, m]` and the certification condition for one covering.
pub fn check_property_d(
    model: &FrameModel,
    cov: &Covering,
    gamma: &PhaseFunction,
    weight: &Weight2D,
    delta: f64,
) -> Result<OscReport> {
    let space = model.space();
    let osc = osc_kernel(model, cov, gamma)?;
    let osc_norm = osc.schur_norm(space, weight)?;
    let r_norm = model.kernel().schur_norm(space, weight)?;
    let c_mu = cov.weight_compatibility(weight)?;
    let mut report = OscReport::from_norms(osc_norm, delta, r_norm, c_mu);
    report.covering_id = cov.id();
    report.n_sets = cov.len();
    report.gamma = gamma.rule();
    report.osc = Some(osc);
    Ok(report)
}

/// Search parameters for [`refine_until`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub delta: f64,
    pub gamma: PhaseRule,
    pub max_rounds: usize,
    /// Starting window width per axis; defaults to the grid span `n h`.
    #[serde(default)]
    pub initial_widths: Option<Vec<f64>>,
    /// When false only property D is required.
    #[serde(default = "default_true")]
    pub require_58: bool,
}

fn default_true() -> bool {
    true
}

impl RefineOptions {
    pub fn new(delta: f64, gamma: PhaseRule) -> Self {
        Self {
            delta,
            gamma,
            max_rounds: 32,
            initial_widths: None,
            require_58: true,
        }
    }
}

/// Halves all window widths (no overlap) each round until the covering
/// passes, switching to the singleton covering once no axis can be split
/// further.
pub fn refine_until(model: &FrameModel, weight: &Weight2D, opts: &RefineOptions) -> Result<(Covering, OscReport)> {
    if !(opts.delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {}", opts.delta)));
    }
    let space = model.space();
    let gamma = PhaseFunction::for_rule(opts.gamma, model)?;
    let dim = space.dim();
    let spacing: Vec<f64> = (0..dim)
        .map(|ax| {
            let v = space.axis_values(ax);
            v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut widths = match &opts.initial_widths {
        Some(w) => {
            check_len("initial widths", dim, w.len())?;
            w.clone()
        }
        None => (0..dim)
            .map(|ax| {
                let v = space.axis_values(ax);
                let h = if spacing[ax].is_finite() { spacing[ax] } else { 1.0 };
                v.len() as f64 * h
            })
            .collect(),
    };
    let mut last = None;
    for _ in 0..opts.max_rounds.max(1) {
        let splittable = (0..dim).any(|ax| spacing[ax].is_finite() && widths[ax] > spacing[ax] * (1.0 + 1e-9));
        let cov = if splittable {
            let axes: Vec<AxisWindow> = (0..dim)
                .map(|ax| AxisWindow {
                    width: if spacing[ax].is_finite() { widths[ax].max(spacing[ax]) } else { widths[ax] },
                    overlap: 0.0,
                })
                .collect();
            uniform_covering_axes(space, &axes).unwrap_or_else(|_| Covering::singletons(space.len()))
        } else {
            Covering::singletons(space.len())
        };
        let report = check_property_d(model, &cov, &gamma, weight, opts.delta)?;
        if report.holds_d && (report.holds_58 || !opts.require_58) {
            return Ok((cov, report));
        }
        let at_end = cov.is_singleton();
        last = Some(report);
        if at_end {
            break;
        }
        for w in &mut widths {
            *w *= 0.5;
        }
    }
    let report = last.expect("at least one round");
    Err(Error::RefineExhausted {
        rounds: opts.max_rounds,
        last_osc_norm: report.osc_norm,
        report: Box::new(report),
    })
}
