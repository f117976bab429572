//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use framedisc_cli::execute;
use framedisc_core::covering::uniform_covering_axes;
use framedisc_core::discretizer::{exact_contraction_l2, hilbert_frame_bounds, power_iteration, select_samples, SampleRule, SamplingPlan};
use framedisc_core::linalg::{hermitian_eigenvalues, CMatrix};
use framedisc_core::oscillation::smallness_lhs;
use framedisc_core::verify::{self, InequalityCheck, KernelNorms};
use framedisc_core::{
    build_pou, check_property_d, discretize, kernel_phase, osc_kernel, uniform_covering, AxisWindow, Covering,
    DiscretizationResult, Exponent, FrameModel, GaborParams, Kernel, PhaseFunction, PipelineOptions, PouKind,
    QuadratureSpace, Weight2D, WeightedLp,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Time-oversampled Gabor configurations certified by the covering that merges
/// `merge` neighboring time positions: (d, n_freq, window, merge).
const GABOR: &[(usize, usize, f64, usize)] = &[
    (4, 16, 2.0, 2),
    (4, 16, 3.0, 3),
    (3, 16, 2.5, 4),
    (5, 16, 3.0, 2),
    (4, 8, 3.0, 4),
    (3, 8, 3.0, 4),
];
const N_TIME: usize = 32;

struct Certified {
    label: String,
    model: FrameModel,
    plan: SamplingPlan,
    gamma: PhaseFunction,
    delta: f64,
}

fn gabor_certified(d: usize, n_freq: usize, s: f64, merge: usize) -> Certified {
    let model = FrameModel::gabor(GaborParams {
        n_time: N_TIME,
        n_freq,
        window_width: s,
        signal_len: Some(d),
    })
    .unwrap();
    let h = d as f64 / N_TIME as f64;
    let cov = uniform_covering_axes(
        model.space(),
        &[
            AxisWindow { width: merge as f64 * h, overlap: 0.0 },
            AxisWindow { width: d as f64 / n_freq as f64, overlap: 0.0 },
        ],
    )
    .unwrap();
    finish(format!("gabor d={d} n_freq={n_freq} s={s} merge={merge}"), model, cov)
}

fn smooth_certified() -> Certified {
    let model = FrameModel::random_smooth(4, 128, 3.0, 7).unwrap();
    let cov = uniform_covering(model.space(), 2.0 / 128.0, 0.0).unwrap();
    finish("random_smooth d=4 n=128".into(), model, cov)
}

/// Picks `delta` halfway between the oscillation norm and the largest delta
/// the certification condition allows (`m = 1`, so `C_{m,U} = 1`).
fn finish(label: String, model: FrameModel, cov: Covering) -> Certified {
    let gamma = kernel_phase(&model);
    let one = Weight2D::constant_one(model.len());
    let probe = check_property_d(&model, &cov, &gamma, &one, 1.0).unwrap();
    let max_delta = -probe.r_norm + (probe.r_norm * probe.r_norm + 1.0).sqrt();
    let delta = 0.5 * (probe.osc_norm + max_delta);
    let pou = build_pou(&cov, model.space(), PouKind::Flat).unwrap();
    let plan = select_samples(&cov, &pou, model.space(), SampleRule::Medoid).unwrap();
    Certified { label, model, plan, gamma, delta }
}

fn brute_schur(k: &Kernel, space: &QuadratureSpace, m: &Weight2D) -> f64 {
    let n = k.size();
    let mut best: f64 = 0.0;
    for x in 0..n {
        let mut row = 0.0;
        let mut col = 0.0;
        for y in 0..n {
            let kxy = k.get(x, y);
            row += space.weight(y) * kxy.re.hypot(kxy.im) * m.get(x, y);
            let kyx = k.get(y, x);
            col += space.weight(y) * kyx.re.hypot(kyx.im) * m.get(y, x);
        }
        best = best.max(row).max(col);
    }
    best
}

fn random_kernel(n: usize, rng: &mut ChaCha8Rng) -> Kernel {
    Kernel::from_fn(n, |_, _| {
        if rng.random_bool(0.2) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
        }
    })
    .unwrap()
}

fn random_space(n: usize, rng: &mut ChaCha8Rng) -> QuadratureSpace {
    let pts = (0..n).map(|k| vec![k as f64]).collect();
    let w = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
    QuadratureSpace::new(pts, w).unwrap()
}

fn c1_reproducing() -> Outcome {
    let one = |n| Weight2D::constant_one(n);
    let mut models = vec![
        ("gabor 32x32 d=32".to_string(), FrameModel::gabor(GaborParams { n_time: 32, n_freq: 32, window_width: 4.0, signal_len: None }).unwrap()),
        ("gabor 16x16 d=16".to_string(), FrameModel::gabor(GaborParams { n_time: 16, n_freq: 16, window_width: 2.0, signal_len: None }).unwrap()),
        ("random_smooth d=16 n=256".to_string(), FrameModel::random_smooth(16, 256, 2.0, 1).unwrap()),
        ("random_smooth d=4 n=128".to_string(), FrameModel::random_smooth(4, 128, 3.0, 7).unwrap()),
    ];
    for &(d, nf, s, _) in GABOR.iter().take(2) {
        models.push((
            format!("gabor 32x{nf} d={d}"),
            FrameModel::gabor(GaborParams { n_time: N_TIME, n_freq: nf, window_width: s, signal_len: Some(d) }).unwrap(),
        ));
    }
    let mut worst: f64 = 0.0;
    for (label, model) in &models {
        let space = model.space();
        let r = model.kernel();
        let err = r.compose(r, space).and_then(|rr| rr.sub(r)).and_then(|k| k.schur_norm(space, &one(model.len()))).unwrap();
        if !(err <= 1e-10) {
            return Err(format!("{label}: ||R o R - R|| = {err:.3e} > 1e-10"));
        }
        worst = worst.max(err);
    }
    Ok(format!("{} models, max ||R o R - R|| = {worst:.2e}", models.len()))
}

fn c2_schur_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_rel: f64 = 0.0;
    let mut sub_violations = 0;
    for t in 0..100 {
        let n = rng.random_range(1..=24);
        let space = random_space(n, &mut rng);
        let m = if t % 3 == 0 {
            Weight2D::constant_one(n)
        } else {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
            Weight2D::from_weight(&w, rng.random_range(0..n)).unwrap()
        };
        let k1 = random_kernel(n, &mut rng);
        let k2 = random_kernel(n, &mut rng);
        for k in [&k1, &k2] {
            let a = k.schur_norm(&space, &m).unwrap();
            let b = brute_schur(k, &space, &m);
            let rel = (a - b).abs() / b.max(f64::MIN_POSITIVE);
            worst_rel = worst_rel.max(rel);
        }
        let lhs = k1.compose(&k2, &space).unwrap().schur_norm(&space, &m).unwrap();
        let rhs = k1.schur_norm(&space, &m).unwrap() * k2.schur_norm(&space, &m).unwrap();
        if lhs > rhs + 1e-12 * rhs.max(1.0) {
            sub_violations += 1;
        }
    }
    if worst_rel > 1e-13 {
        return Err(format!("schur norm differs from brute force by {worst_rel:.2e} relative"));
    }
    if sub_violations > 0 {
        return Err(format!("{sub_violations} submultiplicativity violations"));
    }
    Ok(format!("100 instances, max relative deviation {worst_rel:.2e}, 0 submultiplicativity violations"))
}

fn brute_osc(model: &FrameModel, sets: &[Vec<usize>], gamma: &PhaseFunction) -> Vec<Vec<f64>> {
    let n = model.len();
    let r = model.kernel();
    let mut out = vec![vec![0.0; n]; n];
    for y in 0..n {
        let mut q = Vec::new();
        for s in sets {
            if s.contains(&y) {
                q.extend_from_slice(s);
            }
        }
        for (x, row) in out.iter_mut().enumerate() {
            for &z in &q {
                let v = (r.get(x, y) - gamma.get(y, z) * r.get(x, z)).norm();
                if v > row[y] {
                    row[y] = v;
                }
            }
        }
    }
    out
}

fn c3_osc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let model = if t % 2 == 0 {
            let n = rng.random_range(4..=12);
            FrameModel::random_smooth(rng.random_range(1..=n.min(4)), n, 1.5, t as u64).unwrap()
        } else {
            FrameModel::gabor(GaborParams { n_time: 4, n_freq: 3, window_width: 1.0, signal_len: None }).unwrap()
        };
        let n = model.len();
        let k = rng.random_range(1..=4);
        let mut sets: Vec<Vec<usize>> = (0..n).step_by(k).map(|s| (s..(s + k).min(n)).collect()).collect();
        for _ in 0..rng.random_range(0..3) {
            let a = rng.random_range(0..n);
            sets.push((a..(a + 2).min(n)).collect());
        }
        let cov = Covering::new(sets.clone(), n).unwrap();
        let gamma = match t % 3 {
            0 => PhaseFunction::constant_one(),
            1 => kernel_phase(&model),
            _ => PhaseFunction::user_table(CMatrix::from_fn(n, n, |_, _| {
                Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            }))
            .unwrap(),
        };
        let osc = osc_kernel(&model, &cov, &gamma).unwrap();
        let oracle = brute_osc(&model, cov.sets(), &gamma);
        for x in 0..n {
            for y in 0..n {
                worst = worst.max((osc.get(x, y).re - oracle[x][y]).abs() + osc.get(x, y).im.abs());
            }
        }
        let single = osc_kernel(&model, &Covering::singletons(n), &PhaseFunction::constant_one()).unwrap();
        if single != Kernel::zeros(n) {
            return Err(format!("instance {t}: singleton oscillation is not identically zero"));
        }
    }
    if worst > 1e-14 {
        return Err(format!("max deviation from triple loop {worst:.2e}"));
    }
    Ok(format!("20 instances, max deviation {worst:.2e}, singleton oscillation exactly 0"))
}

fn c4_certificate(configs: &[Certified]) -> Outcome {
    let a = smallness_lhs(0.4, 1.0, 1.0);
    let b = smallness_lhs(0.5, 1.0, 1.0);
    if !((a - 0.96).abs() <= 1e-15 && a <= 1.0) {
        return Err(format!("delta = 0.4 gives {a}, expected 0.96 <= 1"));
    }
    if !((b - 1.25).abs() <= 1e-15 && b > 1.0) {
        return Err(format!("delta = 0.5 gives {b}, expected 1.25 > 1"));
    }
    let mut n_gabor = 0;
    let mut lines = Vec::new();
    for c in configs {
        let one = Weight2D::constant_one(c.model.len());
        let rep = check_property_d(&c.model, c.plan.covering(), &c.gamma, &one, c.delta).unwrap();
        if !rep.certified() {
            return Err(format!("{}: not certified (osc {:.4}, lhs {:.4})", c.label, rep.osc_norm, rep.smallness_lhs));
        }
        let bound = rep.sharp_contraction_bound();
        let power = power_iteration(&c.model, &c.plan, 200, 1e-10, 1).unwrap().estimate;
        let exact = exact_contraction_l2(&c.model, &c.plan);
        let observed = power.max(exact);
        if observed > bound + 1e-9 {
            return Err(format!("{}: observed {observed:.6} exceeds bound {bound:.6}", c.label));
        }
        if c.label.starts_with("gabor") {
            n_gabor += 1;
        }
        lines.push(format!("{:.3}<={:.3}", observed, bound));
    }
    if n_gabor < 5 {
        return Err(format!("only {n_gabor} certified Gabor configurations"));
    }
    Ok(format!("0.96/1.25 reproduced; {} configs ({n_gabor} Gabor), observed<=bound: {}", configs.len(), lines.join(" ")))
}

const NORMAL: &[&str] = &[
    "normal_atomic_reconstruction",
    "normal_banach_round_trip",
    "normal_duality",
    "normal_expansion_dual_coefficients",
    "normal_expansion_dual_atoms",
    "neumann_vs_direct",
];
const SWAPPED: &[&str] = &[
    "swapped_atomic_reconstruction",
    "swapped_banach_round_trip",
    "swapped_duality",
    "swapped_expansion_dual_coefficients",
    "swapped_expansion_dual_atoms",
];

fn residual_suite(results: &[(String, DiscretizationResult)], names: &[&str]) -> Outcome {
    let mut worst = vec![0.0f64; names.len()];
    for (label, res) in results {
        for (k, name) in names.iter().enumerate() {
            let r = res.residual(name).ok_or_else(|| format!("{label}: missing residual {name}"))?;
            if !r.passed {
                return Err(format!("{label}: {name} max {:.3e} > {:.0e}", r.max, r.tolerance));
            }
            if r.count == 0 {
                return Err(format!("{label}: {name} was not measured"));
            }
            worst[k] = worst[k].max(r.max);
        }
    }
    let summary: Vec<String> = names.iter().zip(&worst).map(|(n, w)| format!("{n}={w:.1e}")).collect();
    Ok(format!("{} configs, worst {}", results.len(), summary.join(" ")))
}

fn run_pipelines(configs: &[Certified]) -> Result<Vec<(String, DiscretizationResult)>, String> {
    configs
        .iter()
        .map(|c| {
            let y = WeightedLp::unweighted(Exponent::Finite(2.0), c.model.len());
            let opts = PipelineOptions { delta: c.delta, seed: 5, ..Default::default() };
            discretize(&c.model, &c.plan, &c.gamma, &y, &opts)
                .map(|r| (c.label.clone(), r))
                .map_err(|e| format!("{}: {e}", c.label))
        })
        .collect()
}

fn c7_sandwich() -> Outcome {
    let space = QuadratureSpace::uniform_1d(64, 0.0, 1.0 / 64.0, 1.0 / 64.0).unwrap();
    let cov = uniform_covering(&space, 4.0 / 64.0, 2.0 / 64.0).unwrap();
    let w: Vec<f64> = (0..64).map(|k| (2.0 * k as f64 / 64.0).exp()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parts = Vec::new();
    for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
        let y = WeightedLp::new(p, w.clone()).unwrap();
        let checks = verify::sequence_equivalence(&cov, &space, &y, 50, &mut rng).unwrap();
        for c in &checks {
            if !c.passed() || c.trials != 50 {
                return Err(format!("p = {p}: {} violated {} times (constant {:.4}, worst {:.4})", c.name, c.violations, c.constant, c.worst_ratio));
            }
        }
        parts.push(format!("p={p}: worst/const {}", checks.iter().map(|c| format!("{:.3}/{:.3}", c.worst_ratio, c.constant)).collect::<Vec<_>>().join(",")));
    }
    Ok(parts.join("; "))
}

fn all_pass(label: &str, checks: &[InequalityCheck], out: &mut Vec<String>) -> Result<(), String> {
    for c in checks {
        if !c.passed() {
            return Err(format!("{label}: {} violated {} of {} (constant {:.4}, worst ratio {:.4})", c.name, c.violations, c.trials, c.constant, c.worst_ratio));
        }
        out.push(c.name.clone());
    }
    Ok(())
}

fn c8_inequalities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = FrameModel::random_smooth(4, 96, 3.0, 5).unwrap();
    let space = model.space();
    let cov = uniform_covering(space, 3.0 / 96.0, 1.0 / 96.0).unwrap();
    let shifted = Covering::new(cov.sets().iter().map(|s| s.iter().map(|&x| (x + 1).min(95)).collect()).collect(), 96).unwrap();
    let pou = build_pou(&cov, space, PouKind::Smooth).unwrap();
    let plan = select_samples(&cov, &pou, space, SampleRule::Medoid).unwrap();
    let w: Vec<f64> = (0..96).map(|k| (1.5 * k as f64 / 96.0).exp()).collect();
    let gamma = kernel_phase(&model);
    let mut names = Vec::new();
    let mut worst_frac: f64 = 0.0;
    for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
        let y = WeightedLp::new(p, w.clone()).unwrap();
        let m = y.associated_weight(0).unwrap();
        let norms = KernelNorms::new(&model, &cov, &gamma, &m).unwrap();
        let c_mu = cov.weight_compatibility(&m).unwrap();
        let sigma_sharp = (c_mu * norms.r_norm).max(norms.r_norm + norms.osc_norm);
        let mut checks = Vec::new();
        checks.extend(verify::covering_equivalence(&cov, &shifted, space, &y, 50, &mut rng).unwrap());
        checks.extend(verify::neighbor_sum_bound(&cov, space, &y, 50, 20, &mut rng).unwrap());
        checks.push(verify::linf_embedding(&cov, space, &y, &m, 100, &mut rng).unwrap());
        checks.push(verify::local_l1_embedding(&cov, space, &y, &m, 50, &mut rng).unwrap());
        checks.push(verify::measure_bound(&model, &cov, &norms, &y, 50, &mut rng).unwrap());
        checks.push(verify::range_in_linf(&model, &cov, &norms, &y, &m, 50, &mut rng).unwrap());
        checks.extend(verify::sampled_synthesis_bound(&model, &plan, &norms, &y, &m, 50, &mut rng).unwrap());
        checks.extend(verify::coorbit_embeddings(&model, &y, &m, 50, &mut rng).unwrap());
        let (_, sampling) = verify::sampling_bounds(&model, &plan, &y, &m, sigma_sharp, 50, &mut rng).unwrap();
        checks.extend(sampling);
        for c in &checks {
            if c.constant > 0.0 && c.constant.is_finite() {
                worst_frac = worst_frac.max(c.worst_ratio / c.constant);
            }
        }
        all_pass(&format!("p = {p}"), &checks, &mut names)?;
    }
    names.sort();
    names.dedup();
    Ok(format!("{} inequality families x 3 exponents, 0 violations, worst ratio/constant {worst_frac:.3}", names.len()))
}

fn c9_frame_bounds(results: &[(String, DiscretizationResult)]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, model) in [
        FrameModel::random_smooth(5, 40, 2.0, 3).unwrap(),
        FrameModel::random_smooth(16, 256, 2.0, 1).unwrap(),
        FrameModel::gabor(GaborParams { n_time: 16, n_freq: 8, window_width: 2.0, signal_len: None }).unwrap(),
        FrameModel::orthonormal(7).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let cov = Covering::singletons(model.len());
        let pou = build_pou(&cov, model.space(), PouKind::Flat).unwrap();
        let plan = select_samples(&cov, &pou, model.space(), SampleRule::MaxWeight).unwrap();
        let (c1, c2) = hilbert_frame_bounds(model, &plan);
        let eig = hermitian_eigenvalues(model.frame_operator());
        let dev = (c1 - eig[0]).abs().max((c2 - eig[eig.len() - 1]).abs());
        if dev > 1e-10 {
            return Err(format!("singleton model {k}: bounds deviate from eigenvalues of S by {dev:.2e}"));
        }
        worst = worst.max(dev);
    }
    let mut min_c1 = f64::INFINITY;
    for (label, res) in results {
        if res.holds_58 && !(res.constants.c1 > 0.0) {
            return Err(format!("{label}: certified plan has C1 = {}", res.constants.c1));
        }
        min_c1 = min_c1.min(res.constants.c1);
    }
    Ok(format!("singleton deviation {worst:.1e}; min C1 over {} certified plans {min_c1:.4}", results.len()))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
  "model": {"kind": "gabor", "n_time": 32, "n_freq": 8, "window_width": 3.0, "signal_len": 3},
  "covering": {"kind": "windows", "width": [0.375, 0.375]},
  "delta": 0.2,
  "trials": 20,
  "seed": 42
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}.json"));
        let mut stderr = Vec::new();
        let code = execute(
            ["framedisc", "discretize", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()],
            &mut Vec::new(),
            &mut stderr,
        );
        if code != 0 {
            return Err(format!("run {k} exited {code}: {}", String::from_utf8_lossy(&stderr)));
        }
        reports.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    if reports[0] != reports[1] {
        return Err("reports differ".into());
    }
    Ok(format!("two runs, {} identical bytes", reports[0].len()))
}

fn report(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if elapsed > l => Err(format!("runtime {elapsed:.1?} exceeds {l:?}")),
        (o, _) => o,
    };
    match &outcome {
        Ok(detail) => println!("criterion {id:>2} PASS  {name} [{elapsed:.1?}]: {detail}"),
        Err(reason) => println!("criterion {id:>2} FAIL  {name} [{elapsed:.1?}]: {reason}"),
    }
    outcome.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report(1, "reproducing identity", Some(Duration::from_secs(30)), c1_reproducing);
    ok &= report(2, "Schur norm oracle", None, c2_schur_oracle);
    ok &= report(3, "oscillation oracle", None, c3_osc_oracle);

    let build = Instant::now();
    let mut configs: Vec<Certified> = GABOR.iter().map(|&(d, nf, s, k)| gabor_certified(d, nf, s, k)).collect();
    configs.push(smooth_certified());
    let build_time = build.elapsed();
    ok &= report(4, "contraction certificate", Some(Duration::from_secs(120).saturating_sub(build_time)), || c4_certificate(&configs));

    let pipelines = run_pipelines(&configs);
    let pipelines_ref = &pipelines;
    ok &= report(5, "end-to-end atomic decomposition and Banach frame", None, || {
        residual_suite(pipelines_ref.as_ref().map_err(Clone::clone)?, NORMAL)
    });
    ok &= report(6, "swapped-role pipeline", None, || residual_suite(pipelines_ref.as_ref().map_err(Clone::clone)?, SWAPPED));
    ok &= report(7, "sequence space sandwich", None, c7_sandwich);
    ok &= report(8, "kernel-constant inequality suite", None, c8_inequalities);
    ok &= report(9, "Hilbert frame bounds", None, || c9_frame_bounds(pipelines_ref.as_ref().map_err(Clone::clone)?));
    ok &= report(10, "report determinism", None, c10_determinism);
    if !ok {
        std::process::exit(1);
    }
}
