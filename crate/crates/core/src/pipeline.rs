//! End-to-end discretization run: certificate, inversion, atomic
//! decomposition, Banach frame, dual frames and the inequality suite, with
//! every residual collected into one serializable result.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covering::neighbor_sum_kernel;
use crate::discretizer::{
    atom, atomic_decomposition, banach_frame_reconstruct, dual_frame, exact_contraction_l2, frame_samples,
    hilbert_frame_bounds, l2_norm, power_iteration, s_phi, u_phi, InverseMethod, InverseOperator, SamplingPlan,
    NEUMANN_MAX_TERMS, NEUMANN_TOL,
};
use crate::error::{Error, Result};
use crate::frame::{FrameModel, HilbertVector};
use crate::kernel::Weight2D;
use crate::oscillation::{check_property_d, OscReport, PhaseFunction, PhaseRule};
use crate::quadrature::GridFunction;
use crate::spaces::{norm_flat, norm_natural, WeightedLp};
use crate::verify::{self, InequalityCheck, KernelNorms};

/// Tolerances and trial counts of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub delta: f64,
    pub method: InverseMethod,
    pub neumann_tol: f64,
    pub neumann_max_terms: usize,
    pub seed: u64,
    pub trials: usize,
    pub reconstruction_tol: f64,
    pub duality_tol: f64,
    pub agreement_tol: f64,
    pub identity_tol: f64,
    pub power_max_iter: usize,
    pub power_rel_tol: f64,
    /// Number of sampled admissible permutations for the neighbor-sum check.
    pub permutations: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            delta: 0.25,
            method: InverseMethod::Neumann,
            neumann_tol: NEUMANN_TOL,
            neumann_max_terms: NEUMANN_MAX_TERMS,
            seed: 0,
            trials: 50,
            reconstruction_tol: 1e-8,
            duality_tol: 1e-10,
            agreement_tol: 1e-9,
            identity_tol: 1e-10,
            power_max_iter: 200,
            power_rel_tol: 1e-10,
            permutations: 20,
        }
    }
}

/// Max/mean of one residual family, with its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStat {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl ResidualStat {
    fn from_values(name: &str, values: &[f64], tolerance: f64) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        let finite = values.iter().all(|v| v.is_finite());
        Self {
            name: name.to_string(),
            max,
            mean,
            count: values.len(),
            tolerance,
            passed: finite && max <= tolerance,
        }
    }
}

/// Observed range of `||Vf||_Y / ||(Vf(x_i))||_flat` (or `W` when swapped)
/// against the interval `[1/D, C'/(1-q)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEquivalence {
    pub swap_roles: bool,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub lower_bound: f64,
    /// Absent when the sharp contraction bound is not below 1.
    pub upper_bound: Option<f64>,
    pub passed: bool,
}

/// Scalar constants of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub delta: f64,
    pub sigma: f64,
    pub sigma_sharp: f64,
    #[serde(rename = "R_norm")]
    pub r_norm: f64,
    pub osc_norm: f64,
    #[serde(rename = "C_mU")]
    pub c_mu: f64,
    pub smallness_lhs: f64,
    pub contraction_bound: f64,
    pub contraction_bound_sharp: f64,
    /// Power-iteration lower estimate in `L^2(mu)`.
    pub contraction_observed: f64,
    pub power_iterations: usize,
    /// Exact `L^2(mu)` norm from the eigenvalues of `S^{-1/2} S_d S^{-1/2}`.
    pub contraction_exact: f64,
    /// Lower Hilbert frame bound of `mu(U_i)^{1/2} psi_{x_i}`.
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "D_const")]
    pub d_const: f64,
    #[serde(rename = "C_prime")]
    pub c_prime: f64,
    #[serde(rename = "K_plus_norm")]
    pub k_plus: f64,
    pub max_neumann_terms: usize,
}

/// Everything one discretization run measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationResult {
    pub covering_id: String,
    pub plan_id: String,
    pub n_points: usize,
    pub n_samples: usize,
    pub dim: usize,
    pub gamma: PhaseRule,
    pub method: InverseMethod,
    pub seed: u64,
    #[serde(rename = "holds_D")]
    pub holds_d: bool,
    pub holds_58: bool,
    pub constants: Constants,
    pub residuals: Vec<ResidualStat>,
    pub checks: Vec<InequalityCheck>,
    pub norm_equiv: Vec<NormEquivalence>,
    /// Names of every residual, check or interval that failed.
    pub failing: Vec<String>,
}

impl DiscretizationResult {
    pub fn passed(&self) -> bool {
        self.failing.is_empty()
    }

    pub fn residual(&self, name: &str) -> Option<&ResidualStat> {
        self.residuals.iter().find(|r| r.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn unit_random(d: usize, rng: &mut ChaCha8Rng) -> HilbertVector {
    loop {
        let f = HilbertVector::random(d, rng);
        let n = f.norm();
        if n > 0.0 {
            return HilbertVector::new(f.entries().iter().map(|z| z / n).collect()).expect("finite");
        }
    }
}

fn rel_diff(a: &HilbertVector, b: &HilbertVector) -> f64 {
    let nb = b.norm();
    let diff = a.sub(b).norm();
    if nb > 0.0 {
        diff / nb
    } else {
        diff
    }
}

fn combine(model: &FrameModel, coeffs: &[Complex64], vectors: &[HilbertVector]) -> HilbertVector {
    let mut acc = vec![Complex64::new(0.0, 0.0); model.dim()];
    for (c, v) in coeffs.iter().zip(vectors) {
        for (a, e) in acc.iter_mut().zip(v.entries()) {
            *a += c * e;
        }
    }
    HilbertVector::new(acc).expect("finite")
}

struct RoleOutcome {
    residuals: Vec<ResidualStat>,
    checks: Vec<InequalityCheck>,
    equiv: NormEquivalence,
}

#[allow(clippy::too_many_arguments)]
fn role_suite(
    model: &FrameModel,
    plan: &SamplingPlan,
    inverse: &InverseOperator<'_>,
    y: &WeightedLp,
    opts: &PipelineOptions,
    swap: bool,
    d_const: f64,
    c_prime: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RoleOutcome> {
    let space = model.space();
    let cov = plan.covering();
    let tag = if swap { "swapped" } else { "normal" };
    let duals = dual_frame(model, plan, inverse, swap)?;
    let atoms: Vec<HilbertVector> = plan.samples().iter().map(|&x| atom(model, x, swap)).collect();
    let (mut atomic, mut banach, mut duality, mut exp_b, mut exp_c, mut resample) =
        (vec![], vec![], vec![], vec![], vec![], vec![]);
    let coeff_const = if q < 1.0 { d_const / (1.0 - q) } else { f64::INFINITY };
    let mut coeff = InequalityCheck::new(&format!("{tag}_coefficient_bound"), coeff_const);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..opts.trials {
        let f = unit_random(model.dim(), rng);
        let lambda = atomic_decomposition(model, plan, inverse, &f, swap)?;
        atomic.push(rel_diff(&crate::discretizer::synthesize_plan(model, plan, &lambda, swap)?, &f));

        let analysis = if swap { model.transform_v(&f)? } else { model.transform_w(&f)? };
        coeff.record(norm_natural(&lambda, cov, space, y)?, y.norm(space, &analysis)?);

        let samples = frame_samples(model, plan, &f, swap)?;
        let rec = banach_frame_reconstruct(model, plan, inverse, &samples, swap)?;
        banach.push(rel_diff(&rec, &f));
        let back = frame_samples(model, plan, &rec, swap)?;
        let s_norm = samples.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        resample.push(back.iter().zip(&samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / s_norm);

        let paired: Vec<Complex64> = duals.iter().map(|e| f.inner(e)).collect();
        duality.push(
            lambda
                .iter()
                .zip(&paired)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
        exp_b.push(rel_diff(&combine(model, &paired, &atoms), &f));
        let against_atoms: Vec<Complex64> = atoms.iter().map(|a| f.inner(a)).collect();
        exp_c.push(rel_diff(&combine(model, &against_atoms, &duals), &f));

        let sampled = if swap { model.transform_w(&f)? } else { model.transform_v(&f)? };
        let flat = norm_flat(&plan.sample(&sampled), cov, space, y)?;
        if flat > 0.0 {
            let ratio = y.norm(space, &sampled)? / flat;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    let upper = (q < 1.0).then(|| c_prime / (1.0 - q));
    let lower = 1.0 / d_const;
    let slack = 1.0 + verify::SLACK;
    let equiv_ok = lo * slack >= lower && upper.map_or(true, |u| hi <= u * slack);
    Ok(RoleOutcome {
        residuals: vec![
            ResidualStat::from_values(&format!("{tag}_atomic_reconstruction"), &atomic, opts.reconstruction_tol),
            ResidualStat::from_values(&format!("{tag}_banach_round_trip"), &banach, opts.reconstruction_tol),
            ResidualStat::from_values(&format!("{tag}_resampling"), &resample, opts.reconstruction_tol),
            ResidualStat::from_values(&format!("{tag}_duality"), &duality, opts.duality_tol),
            ResidualStat::from_values(&format!("{tag}_expansion_dual_coefficients"), &exp_b, opts.reconstruction_tol),
            ResidualStat::from_values(&format!("{tag}_expansion_dual_atoms"), &exp_c, opts.reconstruction_tol),
        ],
        checks: if q < 1.0 { vec![coeff] } else { Vec::new() },
        equiv: NormEquivalence {
            swap_roles: swap,
            min_ratio: lo,
            max_ratio: hi,
            lower_bound: lower,
            upper_bound: upper,
            passed: equiv_ok,
        },
    })
}

/// Runs the full pipeline on `Y = L^p_w` with `m` the weight associated to `w`
/// (reference point 0).
///
/// Fails with [`Error::NotContractive`] when Neumann inversion is requested
/// without a certificate, and with numerical errors from the inverses.
pub fn discretize(
    model: &FrameModel,
    plan: &SamplingPlan,
    gamma: &PhaseFunction,
    y: &WeightedLp,
    opts: &PipelineOptions,
) -> Result<DiscretizationResult> {
    let space = model.space();
    let cov = plan.covering();
    if y.len() != space.len() {
        return Err(Error::Dimension {
            what: "weight vs grid",
            expected: space.len(),
            got: y.len(),
        });
    }
    let m: Weight2D = y.associated_weight(0)?;
    let report: OscReport = check_property_d(model, cov, gamma, &m, opts.delta)?;
    let q = report.sharp_contraction_bound();

    let primary = match opts.method {
        InverseMethod::Neumann => {
            InverseOperator::neumann(model, plan, &report, opts.neumann_tol, opts.neumann_max_terms)?
        }
        InverseMethod::Direct => InverseOperator::direct(model, plan)?,
    };
    let secondary = match opts.method {
        InverseMethod::Neumann => InverseOperator::direct(model, plan).ok(),
        InverseMethod::Direct => (q < 1.0)
            .then(|| InverseOperator::neumann_unchecked(model, plan, opts.neumann_tol, opts.neumann_max_terms)),
    };

    let power = power_iteration(model, plan, opts.power_max_iter, opts.power_rel_tol, opts.seed)?;
    let exact = exact_contraction_l2(model, plan);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut residuals = Vec::new();
    let mut checks = Vec::new();

    // certificate
    let mut cert = InequalityCheck::new("contraction_sharp_certificate", q);
    cert.record(power.estimate, 1.0);
    cert.record(exact, 1.0);
    checks.push(cert);
    if report.holds_d {
        let mut nominal = InequalityCheck::new("contraction_nominal_certificate", report.contraction_bound());
        nominal.record(exact, 1.0);
        checks.push(nominal);
    }

    // operator identities on R(Y)
    let r = model.kernel();
    let (mut invariance, mut selfadj, mut agree) = (vec![], vec![], vec![]);
    let mut ratio_excess = vec![];
    let mut max_terms = 0usize;
    let mut eq514 = InequalityCheck::new("quadrature_step", report.r_norm * report.osc_norm);
    let mut eq515 = InequalityCheck::new("phase_step", report.sigma_sharp * report.osc_norm);
    for t in 0..opts.trials {
        let f = model.transform_w(&unit_random(model.dim(), &mut rng))?;
        let g = model.transform_w(&unit_random(model.dim(), &mut rng))?;
        let f_y = y.norm(space, &f)?;
        let uf = u_phi(model, plan, &f)?;
        invariance.push(y.norm(space, &r.apply(space, &uf)?.sub(&uf)?)? / f_y);
        let sf = s_phi(model, plan, gamma, &f)?;
        eq514.record(y.norm(space, &f.sub(&sf)?)?, f_y);
        eq515.record(y.norm(space, &sf.sub(&uf)?)?, f_y);
        let ug = u_phi(model, plan, &g)?;
        let pair = |a: &GridFunction, b: &GridFunction| -> Complex64 {
            a.values()
                .iter()
                .zip(b.values())
                .zip(space.weights())
                .map(|((x, y), w)| x * y.conj() * w)
                .sum()
        };
        let scale = l2_norm(space, &f) * l2_norm(space, &g);
        selfadj.push((pair(&uf, &g) - pair(&f, &ug)).norm() / scale);

        if t < 20 {
            let (a, trace) = primary.apply_traced(&f)?;
            if let Some(sec) = &secondary {
                let (b, trace_b) = sec.apply_traced(&f)?;
                agree.push(l2_norm(space, &a.sub(&b)?) / l2_norm(space, &f));
                for tr in [&trace, &trace_b] {
                    if !tr.term_norms.is_empty() {
                        max_terms = max_terms.max(tr.term_norms.len() - 1);
                        ratio_excess.push((tr.max_ratio() - exact).max(0.0));
                    }
                }
            } else if !trace.term_norms.is_empty() {
                max_terms = max_terms.max(trace.term_norms.len() - 1);
                ratio_excess.push((trace.max_ratio() - exact).max(0.0));
            }
        }
    }
    residuals.push(ResidualStat::from_values("range_invariance", &invariance, opts.identity_tol));
    residuals.push(ResidualStat::from_values("pairing_symmetry", &selfadj, 1e-11));
    residuals.push(ResidualStat::from_values("neumann_vs_direct", &agree, opts.agreement_tol));
    residuals.push(ResidualStat::from_values("neumann_term_ratio_excess", &ratio_excess, 1e-6));
    checks.push(eq514);
    checks.push(eq515);

    // kernel constants
    let norms = KernelNorms::new(model, cov, gamma, &m)?;
    let k_plus = neighbor_sum_kernel(cov, space)?.schur_norm(space, &m)?;
    let c_prime = (norms.osc_norm + norms.r_norm) * k_plus;
    let (d_const, sampling) = verify::sampling_bounds(model, plan, y, &m, report.sigma_sharp, opts.trials, &mut rng)?;
    checks.extend(sampling);
    checks.extend(verify::coorbit_embeddings(model, y, &m, opts.trials, &mut rng)?);
    checks.extend(verify::sampled_synthesis_bound(model, plan, &norms, y, &m, opts.trials, &mut rng)?);
    checks.push(verify::measure_bound(model, cov, &norms, y, opts.trials, &mut rng)?);
    checks.push(verify::range_in_linf(model, cov, &norms, y, &m, opts.trials, &mut rng)?);
    checks.push(verify::local_l1_embedding(cov, space, y, &m, opts.trials, &mut rng)?);
    checks.extend(verify::sequence_equivalence(cov, space, y, opts.trials, &mut rng)?);
    checks.push(verify::linf_embedding(cov, space, y, &m, opts.trials, &mut rng)?);
    checks.extend(verify::neighbor_sum_bound(cov, space, y, opts.trials, opts.permutations, &mut rng)?);

    // both role assignments
    let mut norm_equiv = Vec::new();
    for swap in [false, true] {
        let out = role_suite(model, plan, &primary, y, opts, swap, d_const, c_prime, q, &mut rng)?;
        residuals.extend(out.residuals);
        checks.extend(out.checks);
        norm_equiv.push(out.equiv);
    }

    let (c1, c2) = hilbert_frame_bounds(model, plan);
    let mut failing: Vec<String> = residuals
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.clone())
        .chain(checks.iter().filter(|c| !c.passed()).map(|c| c.name.clone()))
        .chain(
            norm_equiv
                .iter()
                .filter(|e| !e.passed)
                .map(|e| format!("norm_equivalence_{}", if e.swap_roles { "swapped" } else { "normal" })),
        )
        .collect();
    if report.holds_58 && !(c1 > 0.0) {
        failing.push("hilbert_lower_frame_bound".into());
    }

    Ok(DiscretizationResult {
        covering_id: cov.id(),
        plan_id: plan.id(),
        n_points: space.len(),
        n_samples: plan.len(),
        dim: model.dim(),
        gamma: gamma.rule(),
        method: opts.method,
        seed: opts.seed,
        holds_d: report.holds_d,
        holds_58: report.holds_58,
        constants: Constants {
            delta: report.delta,
            sigma: report.sigma,
            sigma_sharp: report.sigma_sharp,
            r_norm: report.r_norm,
            osc_norm: report.osc_norm,
            c_mu: report.c_mu,
            smallness_lhs: report.smallness_lhs,
            contraction_bound: report.contraction_bound(),
            contraction_bound_sharp: q,
            contraction_observed: power.estimate,
            power_iterations: power.iterations,
            contraction_exact: exact,
            c1,
            c2,
            d_const,
            c_prime,
            k_plus,
            max_neumann_terms: max_terms,
        },
        residuals,
        checks,
        norm_equiv,
        failing,
    })
}
