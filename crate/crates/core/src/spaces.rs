//! Weighted `L^p_w` spaces on the grid and the associated sequence spaces
//! `Y_flat`, `Y_natural` and the measure space `D(U, M, Y_natural)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covering::{indicator_product_kernel, Covering};
use crate::error::{check_len, Error, Result};
use crate::kernel::{DiscreteMeasure, Weight2D};
use crate::quadrature::{GridFunction, QuadratureSpace};

/// Integrability exponent `p` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Self::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Self::Finite(p))
        } else {
            Err(Error::InvalidInput(format!("exponent must lie in [1, inf], got {p}")))
        }
    }

    /// Accepts a number or `"inf"`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(Self::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("cannot parse exponent {text:?}")))?;
                Self::new(p)
            }
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Finite(p) => p,
            Self::Infinity => f64::INFINITY,
        }
    }

    /// Conjugate exponent `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Self {
        match self {
            Self::Infinity => Self::Finite(1.0),
            Self::Finite(p) if p == 1.0 => Self::Infinity,
            Self::Finite(p) => Self::Finite(p / (p - 1.0)),
        }
    }

    /// `1/p`, zero for `p = inf`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Self::Finite(p) => 1.0 / p,
            Self::Infinity => 0.0,
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{p}"),
            Self::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(p) => s.serialize_f64(*p),
            Self::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::new(p),
            Raw::Text(t) => Exponent::parse(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `p`-norm of a finite sequence.
pub fn lp_norm(values: impl IntoIterator<Item = f64>, p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => values.into_iter().map(f64::abs).fold(0.0, f64::max),
        Exponent::Finite(p) if p == 1.0 => values.into_iter().map(f64::abs).sum(),
        Exponent::Finite(p) => values.into_iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// `L^p_w(X, mu)` with norm `(sum_x mu_x |F(x) w(x)|^p)^{1/p}`, weighted sup for `p = inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLp {
    p: Exponent,
    w: Vec<f64>,
}

impl WeightedLp {
    pub fn new(p: Exponent, w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput("space weight must be positive and finite".into()));
        }
        Ok(Self { p, w })
    }

    /// Unweighted `L^p`.
    pub fn unweighted(p: Exponent, n: usize) -> Self {
        Self { p, w: vec![1.0; n] }
    }

    /// `L^inf_{1/v}` for the trace `v` of an admissible weight.
    pub fn linf_inverse_v(weight: &Weight2D) -> Self {
        Self {
            p: Exponent::Infinity,
            w: weight.v_values().iter().map(|v| 1.0 / v).collect(),
        }
    }

    /// `L^1_v`.
    pub fn l1_v(weight: &Weight2D) -> Self {
        Self {
            p: Exponent::Finite(1.0),
            w: weight.v_values(),
        }
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// The weight `m(x,y) = max{w(x)/w(y), w(y)/w(x)}` under which `A_m` acts boundedly.
    pub fn associated_weight(&self, reference: usize) -> Result<Weight2D> {
        Weight2D::from_weight(&self.w, reference)
    }

    /// Norm of a nonnegative (or signed real) function given by its values.
    pub fn norm_abs(&self, space: &QuadratureSpace, values: &[f64]) -> Result<f64> {
        check_len("function vs space", space.len(), values.len())?;
        check_len("function vs weight", self.w.len(), values.len())?;
        let mu = space.weights();
        Ok(match self.p {
            Exponent::Infinity => values.iter().zip(&self.w).map(|(f, w)| f.abs() * w).fold(0.0, f64::max),
            Exponent::Finite(p) if p == 1.0 => values
                .iter()
                .zip(&self.w)
                .zip(mu)
                .map(|((f, w), m)| m * f.abs() * w)
                .sum(),
            Exponent::Finite(p) => values
                .iter()
                .zip(&self.w)
                .zip(mu)
                .map(|((f, w), m)| m * (f.abs() * w).powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        })
    }

    pub fn norm(&self, space: &QuadratureSpace, f: &GridFunction) -> Result<f64> {
        self.norm_abs(space, &f.abs())
    }

    /// `||chi_Q||_Y`.
    pub fn indicator_norm(&self, space: &QuadratureSpace, subset: &[usize]) -> Result<f64> {
        let mut chi = vec![0.0; space.len()];
        for &x in subset {
            if x >= chi.len() {
                return Err(Error::InvalidIndex { index: x, len: chi.len() });
            }
            chi[x] = 1.0;
        }
        self.norm_abs(space, &chi)
    }

    /// Hoelder constant `||chi_Q / w||_{L^{p'}}`, so that
    /// `int_Q |F| dmu <= C ||F||_Y`.
    pub fn local_l1_constant(&self, space: &QuadratureSpace, subset: &[usize]) -> Result<f64> {
        let dual = WeightedLp {
            p: self.p.conjugate(),
            w: self.w.iter().map(|w| 1.0 / w).collect(),
        };
        dual.indicator_norm(space, subset)
    }

    /// Dual-norm pairing bound `||g / w||_{L^{p'}}`: `|int g F dmu| <= C ||F||_Y`.
    pub fn dual_norm(&self, space: &QuadratureSpace, g: &[f64]) -> Result<f64> {
        let dual = WeightedLp {
            p: self.p.conjugate(),
            w: self.w.iter().map(|w| 1.0 / w).collect(),
        };
        dual.norm_abs(space, g)
    }
}

/// `sum_i |lambda_i| scale_i chi_{U_i}`.
fn pile_up(seq: &[Complex64], scale: &[f64], cov: &Covering) -> Result<Vec<f64>> {
    check_len("sequence vs covering", cov.len(), seq.len())?;
    let mut out = vec![0.0; cov.n_points()];
    for (i, lam) in seq.iter().enumerate() {
        let a = lam.norm() * scale[i];
        for &x in cov.set(i) {
            out[x] += a;
        }
    }
    Ok(out)
}

/// `||lambda||_{Y_flat} = || sum_i |lambda_i| chi_{U_i} ||_Y`.
pub fn norm_flat(seq: &[Complex64], cov: &Covering, space: &QuadratureSpace, y: &WeightedLp) -> Result<f64> {
    let ones = vec![1.0; cov.len()];
    y.norm_abs(space, &pile_up(seq, &ones, cov)?)
}

/// `||lambda||_{Y_natural} = || sum_i |lambda_i| mu(U_i)^{-1} chi_{U_i} ||_Y`.
pub fn norm_natural(seq: &[Complex64], cov: &Covering, space: &QuadratureSpace, y: &WeightedLp) -> Result<f64> {
    let inv: Vec<f64> = cov.measures(space)?.iter().map(|m| 1.0 / m).collect();
    y.norm_abs(space, &pile_up(seq, &inv, cov)?)
}

/// Per-set weights of the sequence spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceNorms {
    pub p: Exponent,
    pub mu: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub r: Vec<f64>,
}

impl SequenceNorms {
    pub fn new(cov: &Covering, space: &QuadratureSpace, y: &WeightedLp, weight: &Weight2D) -> Result<Self> {
        check_len("covering vs space weight", cov.n_points(), y.len())?;
        check_len("covering vs weight", cov.n_points(), weight.size())?;
        let mu = cov.measures(space)?;
        let sup_over = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
            cov.sets().iter().map(|s| s.iter().map(|&x| f(x)).fold(0.0, f64::max)).collect()
        };
        let w_tilde = sup_over(&|x| y.w()[x]);
        let v_tilde = sup_over(&|x| weight.v(x));
        let inv_p = y.p().reciprocal();
        let b: Vec<f64> = mu.iter().zip(&w_tilde).map(|(m, w)| m.powf(inv_p) * w).collect();
        let d: Vec<f64> = mu.iter().zip(&w_tilde).map(|(m, w)| m.powf(inv_p - 1.0) * w).collect();
        let r = v_tilde.iter().zip(&mu).map(|(v, m)| v * m).collect();
        Ok(Self {
            p: y.p(),
            mu,
            w_tilde,
            v_tilde,
            b,
            d,
            r,
        })
    }

    /// `||lambda||_{l^p_b}`.
    pub fn norm_b(&self, seq: &[Complex64]) -> f64 {
        lp_norm(seq.iter().zip(&self.b).map(|(l, b)| l.norm() * b), self.p)
    }

    /// `||lambda||_{l^p_d}`.
    pub fn norm_d(&self, seq: &[Complex64]) -> f64 {
        lp_norm(seq.iter().zip(&self.d).map(|(l, d)| l.norm() * d), self.p)
    }
}

/// Observed and a-priori constants of `Y_natural -> l^inf_{1/r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub observed: f64,
    pub a_priori: f64,
    pub trials: usize,
}

/// Checks `|lambda_i| <= C r(i) ||lambda||_{Y_natural}` on basis sequences and
/// `trials` random sequences. The a-priori constant comes from the kernels
/// `K_i = chi_{U_k} (x) chi_{U_i}` with `k = 0`, which map `chi_{U_i}` to
/// `mu(U_i) chi_{U_k}`.
pub fn embedding_constant_linf<R: Rng>(
    cov: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    weight: &Weight2D,
    trials: usize,
    rng: &mut R,
) -> Result<EmbeddingReport> {
    if cov.is_empty() {
        return Err(Error::InvalidInput("empty covering".into()));
    }
    let seqn = SequenceNorms::new(cov, space, y, weight)?;
    let m_y = y.associated_weight(weight.reference())?;
    let k = 0;
    let chi_k = y.indicator_norm(space, cov.set(k))?;
    let mut a_priori: f64 = 0.0;
    for i in 0..cov.len() {
        let ki = indicator_product_kernel(space.len(), cov.set(k), cov.set(i))?;
        a_priori = a_priori.max(ki.schur_norm(space, &m_y)? / (chi_k * seqn.r[i]));
    }
    let ratio = |seq: &[Complex64]| -> Result<f64> {
        let nat = norm_natural(seq, cov, space, y)?;
        if nat == 0.0 {
            return Ok(0.0);
        }
        Ok(seq
            .iter()
            .zip(&seqn.r)
            .map(|(l, r)| l.norm() / (r * nat))
            .fold(0.0, f64::max))
    };
    let mut observed: f64 = 0.0;
    let n = cov.len();
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        observed = observed.max(ratio(&e)?);
    }
    for _ in 0..trials {
        let seq: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        observed = observed.max(ratio(&seq)?);
    }
    Ok(EmbeddingReport {
        observed,
        a_priori,
        trials,
    })
}

/// Either a discrete measure or a function, both read as measures on `X`.
#[derive(Debug, Clone, Copy)]
pub enum MeasureLike<'a> {
    Measure(&'a DiscreteMeasure),
    Function(&'a GridFunction),
}

/// `(|nu|(U_i))_i`.
pub fn set_variations(nu: MeasureLike<'_>, cov: &Covering, space: &QuadratureSpace) -> Result<Vec<f64>> {
    let n = space.len();
    check_len("covering vs space", cov.n_points(), n)?;
    match nu {
        MeasureLike::Measure(m) => {
            let merged = m.merged(n)?;
            Ok(cov.sets().iter().map(|s| s.iter().map(|&x| merged[x].norm()).sum()).collect())
        }
        MeasureLike::Function(f) => {
            check_len("function vs space", n, f.len())?;
            Ok(cov
                .sets()
                .iter()
                .map(|s| s.iter().map(|&x| f[x].norm() * space.weight(x)).sum())
                .collect())
        }
    }
}

/// `||nu||_{D(U, M, Y_natural)} = ||(|nu|(U_i))_i||_{Y_natural}`.
pub fn d_space_norm(nu: MeasureLike<'_>, cov: &Covering, space: &QuadratureSpace, y: &WeightedLp) -> Result<f64> {
    let var: Vec<Complex64> = set_variations(nu, cov, space)?
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    norm_natural(&var, cov, space, y)
}

/// Constant `C` with `||F||_{D(U, L^1, (L^inf_{1/v})_natural)} <= C ||F||_Y`,
/// from Hoelder on each set:
/// `C = max_x v(x)^{-1} sum_{i : x in U_i} ||chi_{U_i}/w||_{p'} / mu(U_i)`.
pub fn local_l1_embedding_constant(
    cov: &Covering,
    space: &QuadratureSpace,
    y: &WeightedLp,
    weight: &Weight2D,
) -> Result<f64> {
    let mu = cov.measures(space)?;
    let h: Vec<f64> = cov
        .sets()
        .iter()
        .map(|s| y.local_l1_constant(space, s))
        .collect::<Result<_>>()?;
    let mut c: f64 = 0.0;
    for x in 0..cov.n_points() {
        let s: f64 = cov.containing(x).iter().map(|&i| h[i] / mu[i]).sum();
        c = c.max(s / weight.v(x));
    }
    Ok(c)
}
