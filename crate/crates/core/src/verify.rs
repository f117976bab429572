//! Randomized checks of the norm inequalities behind the discretization,
//! each against a constant computed from an explicit dominating kernel.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covering::{
    equivalence_kernel, check_m_equivalent, neighbor_sum_kernel, permutation_kernel, sample_admissible_permutations,
    Covering,
};
use crate::discretizer::SamplingPlan;
use crate::error::Result;
use crate::frame::{FrameModel, HilbertVector};
use crate::kernel::{DiscreteMeasure, Kernel, Weight2D};
use crate::oscillation::{osc_kernel, PhaseFunction};
use crate::quadrature::{GridFunction, QuadratureSpace};
use crate::spaces::{
    d_space_norm, embedding_constant_linf, local_l1_embedding_constant, norm_flat, norm_natural, MeasureLike,
    SequenceNorms, WeightedLp,
};

/// Absolute and relative slack granted to every inequality.
pub const SLACK: f64 = 1e-10;

/// Outcome of checking `lhs <= constant * rhs` over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub constant: f64,
    /// Largest observed `lhs / rhs`.
    pub worst_ratio: f64,
    pub trials: usize,
    pub violations: usize,
}

impl InequalityCheck {
    pub fn new(name: &str, constant: f64) -> Self {
        Self {
            name: name.to_string(),
            constant,
            worst_ratio: 0.0,
            trials: 0,
            violations: 0,
        }
    }

    pub fn record(&mut self, lhs: f64, rhs: f64) {
        self.trials += 1;
        if rhs > 0.0 {
            self.worst_ratio = self.worst_ratio.max(lhs / rhs);
        }
        if lhs > self.constant * rhs * (1.0 + SLACK) + SLACK {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.constant.is_finite()
    }
}

fn random_complex<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Random sequences with a few entries blown up, so that both ends of the
/// equivalences get exercised.
fn random_sequence<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let mut s = random_complex(n, rng);
    if rng.random_bool(0.5) {
        let keep = rng.random_range(0..n.max(1));
        for (i, v) in s.iter_mut().enumerate() {
            if i != keep && rng.random_bool(0.8) {
                *v *= 1e-3;
            }
        }
    }
    s
}

fn random_measure<R: Rng>(n: usize, rng: &mut R) -> DiscreteMeasure {
    let k = rng.random_range(1..=6);
    DiscreteMeasure::new(
        (0..k)
            .map(|_| {
                (
                    rng.random_range(0..n),
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            })
            .collect(),
    )
}

/// Two-sided comparison of `Y_flat` with `l^p_{b_p}` and of `Y_natural` with
/// `l^p_{d_p}`: `(1/C_{m,U}) ||l||_b <= ||l||_flat <= N ||l||_b`.
pub fn sequence_equivalence<R: Rng>(
    cov: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<InequalityCheck>> {
    let m = y.associated_weight(0)?;
    let c_mu = cov.weight_compatibility(&m)?;
    let n_overlap = cov.validate(space)?.overlap as f64;
    let seqn = SequenceNorms::new(cov, space, y, &m)?;
    let mut flat_lo = InequalityCheck::new("flat_lower", c_mu);
    let mut flat_hi = InequalityCheck::new("flat_upper", n_overlap);
    let mut nat_lo = InequalityCheck::new("natural_lower", c_mu);
    let mut nat_hi = InequalityCheck::new("natural_upper", n_overlap);
    for _ in 0..trials {
        let seq = random_sequence(cov.len(), rng);
        let flat = norm_flat(&seq, cov, space, y)?;
        let b = seqn.norm_b(&seq);
        flat_lo.record(b, flat);
        flat_hi.record(flat, b);
        let nat = norm_natural(&seq, cov, space, y)?;
        let d = seqn.norm_d(&seq);
        nat_lo.record(d, nat);
        nat_hi.record(nat, d);
    }
    Ok(vec![flat_lo, flat_hi, nat_lo, nat_hi])
}

/// `|lambda_i| <= C r(i) ||lambda||_natural` with the kernel constant.
pub fn linf_embedding<R: Rng>(
    cov: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    weight: &Weight2D,
    trials: usize,
    rng: &mut R,
) -> Result<InequalityCheck> {
    let rep = embedding_constant_linf(cov, space, y, weight, trials, rng)?;
    let mut check = InequalityCheck::new("linf_embedding", rep.a_priori);
    check.record(rep.observed, 1.0);
    check.trials = rep.trials + cov.len();
    Ok(check)
}

/// Equivalence of the sequence norms of two m-equivalent coverings through
/// the kernels `L_{UV}` and `L_{VU}`. The closed-form constant
/// `C' N max(1, 1/C_1)` is reported as a second bound on `||L_{UV}||`.
pub fn covering_equivalence<R: Rng>(
    cov_u: &Covering,
    cov_v: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<InequalityCheck>> {
    let m = y.associated_weight(0)?;
    let eq = check_m_equivalent(cov_u, cov_v, &m, space)?;
    let l_uv = equivalence_kernel(cov_u, cov_v, space)?.schur_norm(space, &m)?;
    let l_vu = equivalence_kernel(cov_v, cov_u, space)?.schur_norm(space, &m)?;
    let n_v = cov_v.validate(space)?.overlap as f64;
    let n_u = cov_u.validate(space)?.overlap as f64;
    let closed_form = eq.c_prime * n_u.max(n_v) * (1.0f64).max(1.0 / eq.c1);
    let mut uv = InequalityCheck::new("flat_U_by_V", l_uv);
    let mut vu = InequalityCheck::new("flat_V_by_U", l_vu);
    let mut nat = InequalityCheck::new("natural_U_by_V", l_uv * eq.c2);
    let mut kernel_vs_closed = InequalityCheck::new("L_norm_vs_closed_form", closed_form);
    kernel_vs_closed.record(l_uv, 1.0);
    for _ in 0..trials {
        let seq = random_sequence(cov_u.len(), rng);
        let fu = norm_flat(&seq, cov_u, space, y)?;
        let fv = norm_flat(&seq, cov_v, space, y)?;
        uv.record(fu, fv);
        vu.record(fv, fu);
        nat.record(norm_natural(&seq, cov_u, space, y)?, norm_natural(&seq, cov_v, space, y)?);
    }
    Ok(vec![uv, vu, nat, kernel_vs_closed])
}

/// `lambda+_i = sum_{j in i*} |lambda_j|`.
pub fn neighbor_sums(cov: &Covering, seq: &[Complex64]) -> Vec<Complex64> {
    (0..cov.len())
        .map(|i| Complex64::new(cov.neighbors(i).iter().map(|&j| seq[j].norm()).sum(), 0.0))
        .collect()
}

/// Neighbor-sum boundedness on `Y_natural`: the rigorous kernel `K+` and the
/// permutation kernels `K_pi` of sampled admissible permutations.
pub fn neighbor_sum_bound<R: Rng>(
    cov: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    trials: usize,
    permutations: usize,
    rng: &mut R,
) -> Result<Vec<InequalityCheck>> {
    let m = y.associated_weight(0)?;
    let k_plus = neighbor_sum_kernel(cov, space)?.schur_norm(space, &m)?;
    let perms = sample_admissible_permutations(cov, permutations, rng);
    let mut k_pi_max: f64 = 0.0;
    let mut perm_check = InequalityCheck::new("permutation", 0.0);
    let mut perm_norms = Vec::with_capacity(perms.len());
    for pi in &perms {
        let k = permutation_kernel(cov, space, pi)?.schur_norm(space, &m)?;
        k_pi_max = k_pi_max.max(k);
        perm_norms.push(k);
    }
    perm_check.constant = k_pi_max;
    let n_overlap = cov.validate(space)?.overlap as f64;
    let mut plus = InequalityCheck::new("neighbor_sum_K_plus", k_plus);
    let mut plus_perm = InequalityCheck::new("neighbor_sum_N_max_K_pi", n_overlap * k_pi_max);
    for t in 0..trials {
        let seq = random_sequence(cov.len(), rng);
        let base = norm_natural(&seq, cov, space, y)?;
        let lifted = norm_natural(&neighbor_sums(cov, &seq), cov, space, y)?;
        plus.record(lifted, base);
        plus_perm.record(lifted, base);
        let pi = &perms[t % perms.len()];
        let permuted: Vec<Complex64> = pi.iter().map(|&j| seq[j]).collect();
        let k = perm_norms[t % perms.len()];
        let lhs = norm_natural(&permuted, cov, space, y)?;
        perm_check.trials += 1;
        perm_check.worst_ratio = perm_check.worst_ratio.max(lhs / base / k.max(f64::MIN_POSITIVE) * k_pi_max);
        if lhs > k * base * (1.0 + SLACK) + SLACK {
            perm_check.violations += 1;
        }
    }
    Ok(vec![plus, plus_perm, perm_check])
}

/// `||F||_{D(U, L^1, (L^inf_{1/v})_natural)} <= C ||F||_Y` via Hoelder on each set.
pub fn local_l1_embedding<R: Rng>(
    cov: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    weight: &Weight2D,
    trials: usize,
    rng: &mut R,
) -> Result<InequalityCheck> {
    let c = local_l1_embedding_constant(cov, space, y, weight)?;
    let target = WeightedLp::linf_inverse_v(weight);
    let mut check = InequalityCheck::new("local_l1_embedding", c);
    for _ in 0..trials {
        let f = GridFunction::new(random_sequence(space.len(), rng));
        let lhs = d_space_norm(MeasureLike::Function(&f), cov, space, &target)?;
        check.record(lhs, y.norm(space, &f)?);
    }
    Ok(check)
}

/// Norms shared by the kernel-side checks.
#[derive(Debug, Clone)]
pub struct KernelNorms {
    pub osc: Kernel,
    pub osc_norm: f64,
    pub r_norm: f64,
    /// `||osc + |R| ||_{A_m}`.
    pub sum_norm: f64,
}

impl KernelNorms {
    pub fn new(model: &FrameModel, cov: &Covering, gamma: &PhaseFunction, weight: &Weight2D) -> Result<Self> {
        let space = model.space();
        let osc = osc_kernel(model, cov, gamma)?;
        let osc_norm = osc.schur_norm(space, weight)?;
        let r_norm = model.kernel().schur_norm(space, weight)?;
        let sum_norm = osc.add(&model.kernel().abs())?.schur_norm(space, weight)?;
        Ok(Self {
            osc,
            osc_norm,
            r_norm,
            sum_norm,
        })
    }
}

/// `||R(nu)||_Y <= (||osc|| + ||R||) ||nu||_{D(U, M, Y_natural)}` on random measures.
pub fn measure_bound<R: Rng>(
    model: &FrameModel,
    cov: &Covering,
    norms: &KernelNorms,
    y: &WeightedLp,
    trials: usize,
    rng: &mut R,
) -> Result<InequalityCheck> {
    let space = model.space();
    let mut check = InequalityCheck::new("measure_bound", norms.osc_norm + norms.r_norm);
    for _ in 0..trials {
        let nu = random_measure(space.len(), rng);
        let lhs = y.norm(space, &model.kernel().apply_measure(&nu)?)?;
        check.record(lhs, d_space_norm(MeasureLike::Measure(&nu), cov, space, y)?);
    }
    Ok(check)
}

/// `||R F||_{L^inf_{1/v}} <= (||osc|| + ||R||) C_a ||F||_Y`.
pub fn range_in_linf<R: Rng>(
    model: &FrameModel,
    cov: &Covering,
    norms: &KernelNorms,
    y: &WeightedLp,
    weight: &Weight2D,
    trials: usize,
    rng: &mut R,
) -> Result<InequalityCheck> {
    let space = model.space();
    let c_a = local_l1_embedding_constant(cov, space, y, weight)?;
    let target = WeightedLp::linf_inverse_v(weight);
    let mut check = InequalityCheck::new("range_in_linf", (norms.osc_norm + norms.r_norm) * c_a);
    for _ in 0..trials {
        let f = GridFunction::new(random_sequence(space.len(), rng));
        let rf = model.kernel().apply(space, &f)?;
        check.record(target.norm(space, &rf)?, y.norm(space, &f)?);
    }
    Ok(check)
}

/// Sampled synthesis `||sum_i lambda_i R(., x_i)||_Y <= C' ||lambda||_natural`
/// with `C' = (||osc|| + ||R||) ||K+||`, and the pointwise bound
/// `sum_i |R(x,x_i)| v(x_i) mu(U_i) <= v(x) ||osc + |R| || ||H||_{L^inf_{1/v}}`.
pub fn sampled_synthesis_bound<R: Rng>(
    model: &FrameModel,
    plan: &SamplingPlan,
    norms: &KernelNorms,
    y: &WeightedLp,
    weight: &Weight2D,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<InequalityCheck>> {
    let space = model.space();
    let cov = plan.covering();
    let k_plus = neighbor_sum_kernel(cov, space)?.schur_norm(space, weight)?;
    let mut synth = InequalityCheck::new("sampled_synthesis", (norms.osc_norm + norms.r_norm) * k_plus);
    for _ in 0..trials {
        let seq = random_sequence(plan.len(), rng);
        let nu = DiscreteMeasure::new(plan.samples().iter().copied().zip(seq.iter().copied()).collect());
        let lhs = y.norm(space, &model.kernel().apply_measure(&nu)?)?;
        synth.record(lhs, norm_natural(&seq, cov, space, y)?);
    }
    let mu = plan.set_measures();
    let r = model.kernel();
    let nu_mass: Vec<f64> = plan
        .samples()
        .iter()
        .zip(mu)
        .map(|(&xi, m)| weight.v(xi) * m)
        .collect();
    let mut var = vec![0.0; cov.len()];
    for (i, set) in cov.sets().iter().enumerate() {
        for (j, &xj) in plan.samples().iter().enumerate() {
            if set.binary_search(&xj).is_ok() {
                var[i] += nu_mass[j];
            }
        }
    }
    let mut h = vec![0.0; space.len()];
    for (i, set) in cov.sets().iter().enumerate() {
        for &x in set {
            h[x] += var[i] / mu[i];
        }
    }
    let h_norm = WeightedLp::linf_inverse_v(weight).norm_abs(space, &h)?;
    let mut pointwise = InequalityCheck::new("sampled_synthesis_pointwise", norms.sum_norm * h_norm);
    for x in 0..space.len() {
        let lhs: f64 = plan
            .samples()
            .iter()
            .zip(&nu_mass)
            .map(|(&xi, m)| r.get(x, xi).norm() * m)
            .sum();
        pointwise.record(lhs, weight.v(x));
    }
    Ok(vec![synth, pointwise])
}

/// The sampling kernel `K(x,y) = sum_i |R(x_i,y)| chi_{U_i}(x)`.
pub fn sampling_kernel(model: &FrameModel, plan: &SamplingPlan) -> Result<Kernel> {
    let n = model.len();
    let r = model.kernel();
    let mut k = vec![0.0; n * n];
    for (i, set) in plan.covering().sets().iter().enumerate() {
        let xi = plan.samples()[i];
        for &x in set {
            for y in 0..n {
                k[x * n + y] += r.get(xi, y).norm();
            }
        }
    }
    Kernel::from_real_fn(n, |x, y| k[x * n + y])
}

/// Sampling bounds on `R(Y)`: `||(F(x_i))||_flat <= D ||F||_Y` with
/// `D = ||K||_{A_m}`, and `||sum_i |F(x_i)| phi_i||_Y <= sigma ||F||_Y` with
/// `sigma` taken with `||osc||` in place of `delta`. The same `D` bounds the
/// frame samples `Vf(x_i)` by `||Vf||_Y`.
pub fn sampling_bounds<R: Rng>(
    model: &FrameModel,
    plan: &SamplingPlan,
    y: &WeightedLp,
    weight: &Weight2D,
    sigma_sharp: f64,
    trials: usize,
    rng: &mut R,
) -> Result<(f64, Vec<InequalityCheck>)> {
    let space = model.space();
    let d_const = sampling_kernel(model, plan)?.schur_norm(space, weight)?;
    let mut flat = InequalityCheck::new("sampling_flat", d_const);
    let mut pou = InequalityCheck::new("sampling_pou", sigma_sharp);
    let mut frame = InequalityCheck::new("frame_samples_flat", d_const);
    let cov = plan.covering();
    for t in 0..trials {
        let f = HilbertVector::random(model.dim(), rng);
        let g = model.transform_w(&f)?;
        let gy = y.norm(space, &g)?;
        flat.record(norm_flat(&plan.sample(&g), cov, space, y)?, gy);
        let mut h = vec![0.0; space.len()];
        for (i, &xi) in plan.samples().iter().enumerate() {
            let a = g[xi].norm();
            for (x, phi) in plan.pou().support(i) {
                h[x] += a * phi;
            }
        }
        pou.record(y.norm_abs(space, &h)?, gy);
        let vf = model.transform_v(&f)?;
        frame.record(norm_flat(&plan.sample(&vf), cov, space, y)?, y.norm(space, &vf)?);
        if t == 0 {
            let zero = GridFunction::zeros(space.len());
            flat.record(norm_flat(&plan.sample(&zero), cov, space, y)?, 0.0);
        }
    }
    Ok((d_const, vec![flat, pou, frame]))
}

/// Norm comparisons on `R(Y)` between `L^1_v`, `Y` and `L^inf_{1/v}`:
/// `||F||_Y <= C1 ||F||_{L^1_v}` with `C1 = max_y ||R(.,y)||_Y / v(y)` and
/// `||F||_{L^inf_{1/v}} <= C2 ||F||_Y` with `C2 = max_x ||R(x,.)||_{Y'} / v(x)`.
pub fn coorbit_embeddings<R: Rng>(
    model: &FrameModel,
    y: &WeightedLp,
    weight: &Weight2D,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<InequalityCheck>> {
    let space = model.space();
    let r = model.kernel();
    let n = space.len();
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for z in 0..n {
        let col: Vec<f64> = (0..n).map(|x| r.get(x, z).norm()).collect();
        c1 = c1.max(y.norm_abs(space, &col)? / weight.v(z));
        let row: Vec<f64> = (0..n).map(|x| r.get(z, x).norm()).collect();
        c2 = c2.max(y.dual_norm(space, &row)? / weight.v(z));
    }
    let l1v = WeightedLp::l1_v(weight);
    let linf = WeightedLp::linf_inverse_v(weight);
    let mut lower = InequalityCheck::new("coorbit_Y_by_L1v", c1);
    let mut upper = InequalityCheck::new("coorbit_Linf_by_Y", c2);
    for _ in 0..trials {
        let f = HilbertVector::random(model.dim(), rng);
        let vf = model.transform_v(&f)?;
        let a = l1v.norm(space, &vf)?;
        let b = y.norm(space, &vf)?;
        let c = linf.norm(space, &vf)?;
        lower.record(b, a);
        upper.record(c, b);
    }
    Ok(vec![lower, upper])
}
