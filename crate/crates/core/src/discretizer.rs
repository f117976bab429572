//! Sampling plans, the operator `U_Phi` and its inverse on `R(Y)`,
//! atomic decompositions, Banach-frame reconstruction and dual frames.

use nalgebra::LU;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covering::{Covering, PartitionOfUnity};
use crate::error::{check_len, Error, Result};
use crate::frame::{FrameModel, HilbertVector};
use crate::linalg::{hermitian_eigenvalues, hermitian_function, CMatrix, CVector};
use crate::oscillation::{OscReport, PhaseFunction};
use crate::quadrature::{GridFunction, QuadratureSpace};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRule {
    /// Largest quadrature weight in the set.
    MaxWeight,
    /// Smallest summed coordinate distance to the other points of the set.
    Medoid,
}

/// Covering, partition of unity and one sample point per set.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    covering: Covering,
    pou: PartitionOfUnity,
    samples: Vec<usize>,
    set_measures: Vec<f64>,
}

impl SamplingPlan {
    /// Plan with explicit sample points; each `x_i` must lie in `U_i`.
    pub fn new(covering: Covering, pou: PartitionOfUnity, samples: Vec<usize>, space: &QuadratureSpace) -> Result<Self> {
        check_len("samples vs covering", covering.len(), samples.len())?;
        check_len("partition vs covering", covering.len(), pou.len())?;
        for (i, &x) in samples.iter().enumerate() {
            if covering.set(i).binary_search(&x).is_err() {
                return Err(Error::InvalidInput(format!("sample {x} is not in covering set {i}")));
            }
        }
        let set_measures = covering.measures(space)?;
        Ok(Self {
            covering,
            pou,
            samples,
            set_measures,
        })
    }

    pub fn covering(&self) -> &Covering {
        &self.covering
    }

    pub fn pou(&self) -> &PartitionOfUnity {
        &self.pou
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn c(&self) -> &[f64] {
        self.pou.c()
    }

    pub fn set_measures(&self) -> &[f64] {
        &self.set_measures
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Covering id extended by an FNV-1a hash of the samples and `c_i`.
    pub fn id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for (&x, &c) in self.samples.iter().zip(self.pou.c()) {
            feed(x as u64);
            feed(c.to_bits());
        }
        format!("{}-plan-{h:016x}", self.covering.id())
    }

    /// Values of `F` at the sample points.
    pub fn sample(&self, f: &GridFunction) -> Vec<Complex64> {
        self.samples.iter().map(|&x| f[x]).collect()
    }
}

pub fn select_samples(
    cov: &Covering,
    pou: &PartitionOfUnity,
    space: &QuadratureSpace,
    rule: SampleRule,
) -> Result<SamplingPlan> {
    check_len("covering vs space", cov.n_points(), space.len())?;
    let mut samples = Vec::with_capacity(cov.len());
    for (i, set) in cov.sets().iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidInput(format!("covering set {i} is empty")));
        }
        let score = |x: usize| -> f64 {
            match rule {
                SampleRule::MaxWeight => -space.weight(x),
                SampleRule::Medoid => set
                    .iter()
                    .map(|&z| {
                        space
                            .point(x)
                            .iter()
                            .zip(space.point(z))
                            .map(|(a, b)| (a - b).abs())
                            .sum::<f64>()
                    })
                    .sum(),
            }
        };
        // sets are sorted, so the first strict minimum has the lowest index
        let mut best = set[0];
        let mut best_score = score(best);
        for &x in &set[1..] {
            let s = score(x);
            if s < best_score {
                best = x;
                best_score = s;
            }
        }
        samples.push(best);
    }
    SamplingPlan::new(cov.clone(), pou.clone(), samples, space)
}

/// `U_Phi F(x) = sum_i c_i F(x_i) R(x, x_i)`.
pub fn u_phi(model: &FrameModel, plan: &SamplingPlan, f: &GridFunction) -> Result<GridFunction> {
    check_len("grid function", model.len(), f.len())?;
    let r = model.kernel().matrix();
    let mut out = vec![ZERO; model.len()];
    for (&xi, &ci) in plan.samples().iter().zip(plan.c()) {
        let a = f[xi] * ci;
        if a == ZERO {
            continue;
        }
        for (o, rv) in out.iter_mut().zip(r.column(xi).iter()) {
            *o += a * rv;
        }
    }
    Ok(GridFunction::new(out))
}

/// Grid matrix of `U_Phi`: `M = R diag(a)` with `a_y = sum_{i : x_i = y} c_i`.
pub fn u_phi_matrix(model: &FrameModel, plan: &SamplingPlan) -> CMatrix {
    let mut a = vec![0.0; model.len()];
    for (&xi, &ci) in plan.samples().iter().zip(plan.c()) {
        a[xi] += ci;
    }
    let mut m = model.kernel().matrix().clone();
    for (y, &ay) in a.iter().enumerate() {
        m.column_mut(y).scale_mut(ay);
    }
    m
}

/// `S_Phi F = R(G)` with `G(y) = sum_i conj(Gamma(y, x_i)) F(x_i) phi_i(y)`.
pub fn s_phi(model: &FrameModel, plan: &SamplingPlan, gamma: &PhaseFunction, f: &GridFunction) -> Result<GridFunction> {
    check_len("grid function", model.len(), f.len())?;
    let mut g = vec![ZERO; model.len()];
    for (i, &xi) in plan.samples().iter().enumerate() {
        for (y, phi) in plan.pou().support(i) {
            g[y] += gamma.get(y, xi).conj() * f[xi] * phi;
        }
    }
    model.kernel().apply(model.space(), &GridFunction::new(g))
}

/// `S_d = sum_i c_i psi_{x_i} psi_{x_i}^*`.
pub fn sampled_frame_operator(model: &FrameModel, plan: &SamplingPlan) -> CMatrix {
    let d = model.dim();
    let mut sd = CMatrix::zeros(d, d);
    for (&xi, &ci) in plan.samples().iter().zip(plan.c()) {
        let col = model.psi_matrix().column(xi);
        sd += (&col * col.adjoint()).scale(ci);
    }
    sd
}

/// Exact `L^2(mu)` norm of `Id - U_Phi` on `R(Y)`: on `V(H)` the operator is
/// `V (I - S^{-1} S_d) V^{-1}`, an isometric image of
/// `I - S^{-1/2} S_d S^{-1/2}`.
pub fn exact_contraction_l2(model: &FrameModel, plan: &SamplingPlan) -> f64 {
    let s_half_inv = hermitian_function(model.frame_operator(), |l| 1.0 / l.sqrt());
    let sd = sampled_frame_operator(model, plan);
    let t = &s_half_inv * sd * &s_half_inv;
    hermitian_eigenvalues(&t)
        .into_iter()
        .map(|l| (1.0 - l).abs())
        .fold(0.0, f64::max)
}

/// `L^2(mu)` norm.
pub fn l2_norm(space: &QuadratureSpace, f: &GridFunction) -> f64 {
    f.values()
        .iter()
        .zip(space.weights())
        .map(|(v, w)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Power-iteration estimate of `||R (Id - U_Phi) R||` in `L^2(mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub estimate: f64,
    pub iterations: usize,
}

/// Runs at most `max_iter` steps from a seeded random start, reporting the
/// largest observed ratio `||A F|| / ||F||`; stops once the ratio stagnates
/// to `rel_tol`. Always a lower bound for the operator norm.
pub fn power_iteration(model: &FrameModel, plan: &SamplingPlan, max_iter: usize, rel_tol: f64, seed: u64) -> Result<PowerEstimate> {
    let space = model.space();
    let r = model.kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = HilbertVector::random(model.dim(), &mut rng);
    let mut f = model.transform_w(&start)?;
    let mut norm = l2_norm(space, &f);
    if norm == 0.0 {
        return Ok(PowerEstimate { estimate: 0.0, iterations: 0 });
    }
    f = f.scale(Complex64::new(1.0 / norm, 0.0));
    let mut best: f64 = 0.0;
    let mut prev = f64::NAN;
    let mut iterations = 0;
    for k in 0..max_iter {
        iterations = k + 1;
        let uf = u_phi(model, plan, &f)?;
        let g = r.apply(space, &f.sub(&uf)?)?;
        norm = l2_norm(space, &g);
        best = best.max(norm);
        if norm == 0.0 {
            break;
        }
        if (norm - prev).abs() <= rel_tol * norm {
            break;
        }
        prev = norm;
        f = g.scale(Complex64::new(1.0 / norm, 0.0));
    }
    Ok(PowerEstimate { estimate: best, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMethod {
    Neumann,
    Direct,
}

impl std::str::FromStr for InverseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neumann" => Ok(Self::Neumann),
            "direct" => Ok(Self::Direct),
            other => Err(Error::InvalidInput(format!("unknown inversion method {other:?}"))),
        }
    }
}

/// Diagnostics of one application of the inverse.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InverseTrace {
    /// `L^2(mu)` norms of the Neumann terms, starting with `||F||`.
    pub term_norms: Vec<f64>,
}

impl InverseTrace {
    /// Largest ratio of consecutive term norms.
    pub fn max_ratio(&self) -> f64 {
        self.term_norms
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// `U_Phi^{-1}` on `R(Y)`, by Neumann series or by a dense solve.
pub struct InverseOperator<'a> {
    model: &'a FrameModel,
    plan: &'a SamplingPlan,
    method: InverseMethod,
    tol: f64,
    n_max: usize,
    lu: Option<LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl std::fmt::Debug for InverseOperator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverseOperator")
            .field("method", &self.method)
            .field("tol", &self.tol)
            .field("n_max", &self.n_max)
            .finish()
    }
}

pub const NEUMANN_TOL: f64 = 1e-12;
pub const NEUMANN_MAX_TERMS: usize = 200;

impl<'a> InverseOperator<'a> {
    /// Neumann series; refused unless the sharp contraction bound is below 1.
    pub fn neumann(
        model: &'a FrameModel,
        plan: &'a SamplingPlan,
        report: &OscReport,
        tol: f64,
        n_max: usize,
    ) -> Result<Self> {
        let bound = report.sharp_contraction_bound();
        if !(bound < 1.0) {
            return Err(Error::NotContractive { bound });
        }
        Ok(Self::neumann_unchecked(model, plan, tol, n_max))
    }

    /// Neumann series without a certificate; fails with `NotConverged` when the
    /// terms do not decay.
    pub fn neumann_unchecked(model: &'a FrameModel, plan: &'a SamplingPlan, tol: f64, n_max: usize) -> Self {
        Self {
            model,
            plan,
            method: InverseMethod::Neumann,
            tol,
            n_max,
            lu: None,
        }
    }

    /// LU factorization of `P M P + (I - P)` with `P = R diag(mu)` the
    /// projection onto `R(Y)` and `M` the grid matrix of `U_Phi`.
    pub fn direct(model: &'a FrameModel, plan: &'a SamplingPlan) -> Result<Self> {
        let n = model.len();
        let mut p = model.kernel().matrix().clone();
        for (y, &w) in model.space().weights().iter().enumerate() {
            p.column_mut(y).scale_mut(w);
        }
        let m = u_phi_matrix(model, plan);
        let a = &p * m * &p + CMatrix::identity(n, n) - &p;
        let lu = a.lu();
        let diag = lu.u().diagonal();
        let max = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min = diag.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if !(min > 1e-13 * max.max(1.0)) {
            return Err(Error::Numerical(format!(
                "U_Phi is numerically singular on R(Y) (pivot ratio {:.3e})",
                min / max
            )));
        }
        Ok(Self {
            model,
            plan,
            method: InverseMethod::Direct,
            tol: 0.0,
            n_max: 0,
            lu: Some(lu),
        })
    }

    pub fn method(&self) -> InverseMethod {
        self.method
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply_traced(f).map(|(g, _)| g)
    }

    /// Applies the inverse; the trace lists Neumann term norms.
    pub fn apply_traced(&self, f: &GridFunction) -> Result<(GridFunction, InverseTrace)> {
        check_len("grid function", self.model.len(), f.len())?;
        match &self.lu {
            Some(lu) => {
                let b = CVector::from_column_slice(f.values());
                let x = lu
                    .solve(&b)
                    .ok_or_else(|| Error::Numerical("LU solve failed".into()))?;
                Ok((GridFunction::new(x.iter().copied().collect()), InverseTrace::default()))
            }
            None => self.neumann_series(f),
        }
    }

    fn neumann_series(&self, f: &GridFunction) -> Result<(GridFunction, InverseTrace)> {
        let space = self.model.space();
        let r = self.model.kernel();
        let f_norm = l2_norm(space, f);
        let mut trace = InverseTrace {
            term_norms: vec![f_norm],
        };
        if f_norm == 0.0 {
            return Ok((f.clone(), trace));
        }
        let mut sum = f.clone();
        let mut term = f.clone();
        for _ in 0..self.n_max {
            let ut = u_phi(self.model, self.plan, &term)?;
            term = r.apply(space, &term.sub(&ut)?)?;
            let t_norm = l2_norm(space, &term);
            trace.term_norms.push(t_norm);
            sum = sum.axpy(Complex64::new(1.0, 0.0), &term)?;
            if t_norm <= self.tol * f_norm {
                return Ok((sum, trace));
            }
        }
        Err(Error::NotConverged {
            terms: self.n_max,
            last: trace.term_norms.last().copied().unwrap_or(f64::NAN) / f_norm,
        })
    }
}

/// `sum_i c_i lambda_i R(., x_i)`.
pub fn sampled_synthesis(model: &FrameModel, plan: &SamplingPlan, lambda: &[Complex64]) -> Result<GridFunction> {
    check_len("coefficients vs plan", plan.len(), lambda.len())?;
    let r = model.kernel().matrix();
    let mut out = vec![ZERO; model.len()];
    for ((&xi, &ci), &l) in plan.samples().iter().zip(plan.c()).zip(lambda) {
        let a = l * ci;
        for (o, rv) in out.iter_mut().zip(r.column(xi).iter()) {
            *o += a * rv;
        }
    }
    Ok(GridFunction::new(out))
}

fn analysis(model: &FrameModel, f: &HilbertVector, swap_roles: bool) -> Result<GridFunction> {
    if swap_roles {
        model.transform_v(f)
    } else {
        model.transform_w(f)
    }
}

fn sample_transform(model: &FrameModel, f: &HilbertVector, swap_roles: bool) -> Result<GridFunction> {
    if swap_roles {
        model.transform_w(f)
    } else {
        model.transform_v(f)
    }
}

fn transform_inverse(model: &FrameModel, g: &GridFunction, swap_roles: bool) -> Result<HilbertVector> {
    if swap_roles {
        model.w_inverse(g)
    } else {
        model.v_inverse(g)
    }
}

/// Atom `psi_{x_i}`, or `S^{-1} psi_{x_i}` with swapped roles.
pub fn atom(model: &FrameModel, x: usize, swap_roles: bool) -> HilbertVector {
    if swap_roles {
        model.dual_atom(x)
    } else {
        model.psi(x)
    }
}

/// `lambda_i(f) = c_i (U_Phi^{-1} W f)(x_i)`; with swapped roles `V` replaces `W`.
pub fn atomic_decomposition(
    model: &FrameModel,
    plan: &SamplingPlan,
    inverse: &InverseOperator<'_>,
    f: &HilbertVector,
    swap_roles: bool,
) -> Result<Vec<Complex64>> {
    let g = inverse.apply(&analysis(model, f, swap_roles)?)?;
    Ok(plan.samples().iter().zip(plan.c()).map(|(&xi, &ci)| g[xi] * ci).collect())
}

/// `sum_i lambda_i psi_{x_i}` (or dual atoms with swapped roles).
pub fn synthesize_plan(model: &FrameModel, plan: &SamplingPlan, lambda: &[Complex64], swap_roles: bool) -> Result<HilbertVector> {
    check_len("coefficients vs plan", plan.len(), lambda.len())?;
    let mut acc = CVector::zeros(model.dim());
    for (&xi, &l) in plan.samples().iter().zip(lambda) {
        acc += atom(model, xi, swap_roles).to_vector() * l;
    }
    Ok(HilbertVector::from_vector(&acc))
}

/// Frame samples `Vf(x_i)`, or `Wf(x_i)` with swapped roles.
pub fn frame_samples(model: &FrameModel, plan: &SamplingPlan, f: &HilbertVector, swap_roles: bool) -> Result<Vec<Complex64>> {
    Ok(plan.sample(&sample_transform(model, f, swap_roles)?))
}

/// Recovers `f` from its frame samples through
/// `Vf = U_Phi^{-1}(sum_i c_i Vf(x_i) R(., x_i))`.
pub fn banach_frame_reconstruct(
    model: &FrameModel,
    plan: &SamplingPlan,
    inverse: &InverseOperator<'_>,
    samples: &[Complex64],
    swap_roles: bool,
) -> Result<HilbertVector> {
    let g = inverse.apply(&sampled_synthesis(model, plan, samples)?)?;
    transform_inverse(model, &g, swap_roles)
}

/// Dual frame vectors `e_i` with `V e_i = E_i = c_i U_Phi^{-1}(R(., x_i))`
/// (`W` in place of `V` with swapped roles), solved in the least-squares sense.
pub fn dual_frame(
    model: &FrameModel,
    plan: &SamplingPlan,
    inverse: &InverseOperator<'_>,
    swap_roles: bool,
) -> Result<Vec<HilbertVector>> {
    let (lo, _) = model.frame_bounds();
    if !(lo > 0.0) {
        return Err(Error::Numerical("analysis operator is not injective".into()));
    }
    let r = model.kernel().matrix();
    let mut out = Vec::with_capacity(plan.len());
    for (&xi, &ci) in plan.samples().iter().zip(plan.c()) {
        let col = GridFunction::new(r.column(xi).iter().copied().collect());
        let e = inverse.apply(&col)?.scale(Complex64::new(ci, 0.0));
        out.push(transform_inverse(model, &e, swap_roles)?);
    }
    Ok(out)
}

/// Extreme eigenvalues of `sum_i mu(U_i) psi_{x_i} psi_{x_i}^*`.
pub fn hilbert_frame_bounds(model: &FrameModel, plan: &SamplingPlan) -> (f64, f64) {
    let d = model.dim();
    let mut op = CMatrix::zeros(d, d);
    for (&xi, &mu) in plan.samples().iter().zip(plan.set_measures()) {
        let col = model.psi_matrix().column(xi);
        op += (&col * col.adjoint()).scale(mu);
    }
    let e = hermitian_eigenvalues(&op);
    (e[0], e[e.len() - 1])
}
