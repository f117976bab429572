//! Finite continuous-frame models: vectors `psi_x in C^d` indexed by the
//! grid, the frame operator `S`, the transforms `V`, `W` and the
//! reproducing kernel `R`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::{complex_from_bytes, complex_to_bytes, DiscreteMeasure, Kernel};
use crate::linalg::{hermitian_eigenvalues, hermitian_inverse, CMatrix, CVector, EIGEN_FLOOR};
use crate::quadrature::{GridFunction, QuadratureSpace};

/// Element of `H = C^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertVector {
    entries: Vec<Complex64>,
}

impl HilbertVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("Hilbert vector"));
        }
        Ok(Self { entries })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            entries: vec![Complex64::new(0.0, 0.0); d],
        }
    }

    /// Entries drawn from a standard complex Gaussian.
    pub fn random(d: usize, rng: &mut impl rand::Rng) -> Self {
        Self {
            entries: (0..d)
                .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `<self, other> = sum_k self_k conj(other_k)`.
    pub fn inner(&self, other: &HilbertVector) -> Complex64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &HilbertVector) -> HilbertVector {
        Self {
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_column_slice(&self.entries)
    }

    pub fn from_vector(v: &CVector) -> Self {
        Self {
            entries: v.iter().copied().collect(),
        }
    }
}

/// Parameters of the periodic Gabor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    /// Number of time positions on the phase-space grid.
    pub n_time: usize,
    /// Number of frequency positions on the phase-space grid.
    pub n_freq: usize,
    /// Gaussian width in samples.
    pub window_width: f64,
    /// Signal length `d`; defaults to `n_time`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_len: Option<usize>,
}

/// A finite frame `{psi_x}` over a quadrature space with its derived operators.
#[derive(Debug, Clone)]
pub struct FrameModel {
    space: QuadratureSpace,
    /// `d x n`, column `x` is `psi_x`.
    psi: CMatrix,
    s: CMatrix,
    s_inv: CMatrix,
    /// `S^{-1} psi_x` as columns.
    dual: CMatrix,
    r: Kernel,
}

impl FrameModel {
    /// Builds the model from the columns of `psi` (`d x n`).
    pub fn from_vectors(space: QuadratureSpace, psi: CMatrix, floor: f64) -> Result<Self> {
        check_len("frame vectors vs space", space.len(), psi.ncols())?;
        if psi.nrows() == 0 {
            return Err(Error::InvalidInput("frame dimension must be positive".into()));
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("frame vectors"));
        }
        let mut weighted = psi.clone();
        for (x, &w) in space.weights().iter().enumerate() {
            weighted.column_mut(x).scale_mut(w);
        }
        let s = &weighted * psi.adjoint();
        let s = (&s + s.adjoint()).scale(0.5);
        let s_inv = hermitian_inverse(&s, floor).map_err(|_| {
            Error::Numerical(format!(
                "frame operator is singular (smallest eigenvalue {:.3e} <= {floor:.1e}); the vectors do not span C^{}, use more points",
                hermitian_eigenvalues(&s)[0],
                psi.nrows()
            ))
        })?;
        let dual = &s_inv * &psi;
        let r = psi.adjoint() * &dual;
        let r = Kernel::new((&r + r.adjoint()).scale(0.5))?;
        Ok(Self {
            space,
            psi,
            s,
            s_inv,
            dual,
            r,
        })
    }

    /// Standard basis of `C^d` on `d` points with unit weights.
    pub fn orthonormal(d: usize) -> Result<Self> {
        let space = QuadratureSpace::uniform_1d(d, 0.0, 1.0, 1.0)?;
        Self::from_vectors(space, CMatrix::identity(d, d), EIGEN_FLOOR)
    }

    /// Periodized Gaussian window of width `window_width` (samples), shifted by `t`
    /// and modulated by `omega` cycles per signal length, unit-normalized.
    /// The grid is `n_time x n_freq` over `[0, d) x [0, d)` with cell area weights.
    pub fn gabor(params: GaborParams) -> Result<Self> {
        let GaborParams {
            n_time,
            n_freq,
            window_width: width,
            signal_len,
        } = params;
        let d = signal_len.unwrap_or(n_time);
        if n_time == 0 || n_freq == 0 || d == 0 {
            return Err(Error::InvalidInput("Gabor grid sizes must be positive".into()));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidInput(format!("degenerate window width {width}")));
        }
        let df = d as f64;
        let dt = df / n_time as f64;
        let dw = df / n_freq as f64;
        let times: Vec<f64> = (0..n_time).map(|j| j as f64 * dt).collect();
        let freqs: Vec<f64> = (0..n_freq).map(|k| k as f64 * dw).collect();
        let space = QuadratureSpace::product_grid(&[times.clone(), freqs.clone()], dt * dw)?;
        let images = (6.0 * width / df).ceil() as i64 + 1;
        let window = |u: f64| -> f64 {
            (-images..=images)
                .map(|l| {
                    let v = (u + l as f64 * df) / width;
                    (-PI * v * v).exp()
                })
                .sum()
        };
        let mut psi = CMatrix::zeros(d, space.len());
        for (j, &t) in times.iter().enumerate() {
            let g: Vec<f64> = (0..d).map(|n| window(n as f64 - t)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::InvalidInput(format!("window width {width} underflows")));
            }
            for (k, &om) in freqs.iter().enumerate() {
                let col = j * n_freq + k;
                for n in 0..d {
                    let phase = 2.0 * PI * om * n as f64 / df;
                    psi[(n, col)] = Complex64::from_polar(g[n] / norm, phase);
                }
            }
        }
        Self::from_vectors(space, psi, EIGEN_FLOOR)
    }

    /// Random smooth frame on `n_points` equispaced points of `[0, 1)` with
    /// weights `1 / n_points`.
    pub fn random_smooth(d: usize, n_points: usize, smoothness: f64, seed: u64) -> Result<Self> {
        if d == 0 || n_points < d {
            return Err(Error::InvalidInput(format!(
                "random smooth model needs 0 < d <= n_points, got d = {d}, n_points = {n_points}"
            )));
        }
        let h = 1.0 / n_points as f64;
        let space = QuadratureSpace::uniform_1d(n_points, 0.0, h, h)?;
        Self::random_smooth_on(space, d, smoothness, seed)
    }

    /// Random smooth frame on an arbitrary grid: a normalized sum of random
    /// Fourier features with vector-valued Gaussian amplitudes. Larger
    /// `smoothness` gives slower variation over the coordinates.
    pub fn random_smooth_on(space: QuadratureSpace, d: usize, smoothness: f64, seed: u64) -> Result<Self> {
        if !(smoothness.is_finite() && smoothness > 0.0) {
            return Err(Error::InvalidInput(format!("smoothness must be positive, got {smoothness}")));
        }
        if d == 0 || space.len() < d {
            return Err(Error::InvalidInput(format!(
                "random smooth model needs 0 < d <= n_points, got d = {d}, n_points = {}",
                space.len()
            )));
        }
        let dim = space.dim();
        let extent: Vec<f64> = (0..dim)
            .map(|ax| {
                let v = space.axis_values(ax);
                (v[v.len() - 1] - v[0]).max(1e-12)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = 2 * d + 2;
        let scale = 2.0 * PI * d as f64 / smoothness;
        let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut thetas = Vec::with_capacity(features);
        let mut offsets = Vec::with_capacity(features);
        let mut amps: Vec<Vec<Complex64>> = Vec::with_capacity(features);
        for _ in 0..features {
            thetas.push((0..dim).map(|ax| gauss() * scale / extent[ax]).collect::<Vec<f64>>());
            offsets.push(gauss() * PI);
            amps.push((0..d).map(|_| Complex64::new(gauss(), gauss())).collect());
        }
        let mut psi = CMatrix::zeros(d, space.len());
        for x in 0..space.len() {
            let p = space.point(x);
            for f in 0..features {
                let arg: f64 = thetas[f].iter().zip(p).map(|(t, c)| t * c).sum::<f64>() + offsets[f];
                let e = Complex64::from_polar(1.0, arg);
                for k in 0..d {
                    psi[(k, x)] += amps[f][k] * e;
                }
            }
            let norm = psi.column(x).norm();
            if !(norm > 0.0) {
                return Err(Error::Numerical(format!("frame vector at point {x} vanished")));
            }
            psi.column_mut(x).unscale_mut(norm);
        }
        Self::from_vectors(space, psi, EIGEN_FLOOR)
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn len(&self) -> usize {
        self.psi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.ncols() == 0
    }

    pub fn space(&self) -> &QuadratureSpace {
        &self.space
    }

    pub fn psi_matrix(&self) -> &CMatrix {
        &self.psi
    }

    pub fn psi(&self, x: usize) -> HilbertVector {
        HilbertVector::from_vector(&self.psi.column(x).into_owned())
    }

    /// `S^{-1} psi_x`.
    pub fn dual_atom(&self, x: usize) -> HilbertVector {
        HilbertVector::from_vector(&self.dual.column(x).into_owned())
    }

    pub fn frame_operator(&self) -> &CMatrix {
        &self.s
    }

    pub fn frame_operator_inverse(&self) -> &CMatrix {
        &self.s_inv
    }

    /// `R(x,y) = psi_x^* S^{-1} psi_y = W(psi_y)(x)`.
    pub fn kernel(&self) -> &Kernel {
        &self.r
    }

    pub fn frame_bounds(&self) -> (f64, f64) {
        let e = hermitian_eigenvalues(&self.s);
        (e[0], e[e.len() - 1])
    }

    fn check_dim(&self, f: &HilbertVector) -> Result<()> {
        check_len("Hilbert vector", self.dim(), f.dim())
    }

    /// `Vf(x) = <f, psi_x>`.
    pub fn transform_v(&self, f: &HilbertVector) -> Result<GridFunction> {
        self.check_dim(f)?;
        let out = self.psi.adjoint() * f.to_vector();
        Ok(GridFunction::new(out.iter().copied().collect()))
    }

    /// `Wf(x) = <f, S^{-1} psi_x>`.
    pub fn transform_w(&self, f: &HilbertVector) -> Result<GridFunction> {
        self.check_dim(f)?;
        let out = self.dual.adjoint() * f.to_vector();
        Ok(GridFunction::new(out.iter().copied().collect()))
    }

    /// `sum_x mu_x F(x) psi_x`, the adjoint of `V` in the `mu` pairing.
    pub fn v_adjoint(&self, f: &GridFunction) -> Result<HilbertVector> {
        check_len("grid function", self.len(), f.len())?;
        let weighted: CVector = CVector::from_iterator(
            self.len(),
            f.values().iter().zip(self.space.weights()).map(|(v, w)| v * *w),
        );
        Ok(HilbertVector::from_vector(&(&self.psi * weighted)))
    }

    /// Left inverse of `V`: `S^{-1} sum_x mu_x F(x) psi_x`.
    pub fn v_inverse(&self, f: &GridFunction) -> Result<HilbertVector> {
        let g = self.v_adjoint(f)?;
        Ok(HilbertVector::from_vector(&(&self.s_inv * g.to_vector())))
    }

    /// Left inverse of `W`: `sum_x mu_x F(x) psi_x`.
    pub fn w_inverse(&self, f: &GridFunction) -> Result<HilbertVector> {
        self.v_adjoint(f)
    }

    /// `sum_i lambda_i psi_{x_i}`, no quadrature weights.
    pub fn synthesize(&self, coeffs: &DiscreteMeasure) -> Result<HilbertVector> {
        let merged = coeffs.merged(self.len())?;
        Ok(HilbertVector::from_vector(&(&self.psi * CVector::from_vec(merged))))
    }

    /// `sum_i lambda_i S^{-1} psi_{x_i}`.
    pub fn synthesize_dual(&self, coeffs: &DiscreteMeasure) -> Result<HilbertVector> {
        let merged = coeffs.merged(self.len())?;
        Ok(HilbertVector::from_vector(&(&self.dual * CVector::from_vec(merged))))
    }

    /// `G(x,y) = <psi_y, psi_x>`, so that `V(sum lambda_y psi_y) = G(nu)`.
    pub fn gram_kernel(&self) -> Result<Kernel> {
        Kernel::new(self.psi.adjoint() * &self.psi)
    }

    /// Column-major `psi` (`d x n`) as little-endian `(re, im)` pairs after a
    /// `d`, `n` header of two little-endian u64.
    pub fn psi_to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.psi.len());
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend(complex_to_bytes(self.psi.as_slice()));
        out
    }

    pub fn psi_from_bytes(bytes: &[u8]) -> Result<CMatrix> {
        if bytes.len() < 16 {
            return Err(Error::InvalidInput("psi fixture too short".into()));
        }
        let d = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let values = complex_from_bytes(&bytes[16..])?;
        check_len("psi fixture", d * n, values.len())?;
        Ok(CMatrix::from_vec(d, n, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Weight2D;
    use crate::linalg::max_abs_diff;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn small_random_model() -> FrameModel {
        FrameModel::random_smooth(4, 24, 1.0, 11).unwrap()
    }

    #[test]
    fn kernel_is_hermitian_and_reproducing() {
        for model in [small_random_model(), FrameModel::gabor(GaborParams { n_time: 8, n_freq: 8, window_width: 2.0, signal_len: None }).unwrap()] {
            let r = model.kernel();
            assert!(max_abs_diff(r.matrix(), &r.matrix().adjoint()) <= 1e-13);
            let rr = r.compose(r, model.space()).unwrap();
            let diff = rr.sub(r).unwrap();
            let one = Weight2D::constant_one(model.len());
            assert!(diff.schur_norm(model.space(), &one).unwrap() <= 1e-11);
            assert!(max_abs_diff(model.frame_operator(), &model.frame_operator().adjoint()) <= 1e-12);
        }
    }

    #[test]
    fn transforms_match_loops() {
        let model = small_random_model();
        let mut g = rng(1);
        let f = HilbertVector::random(4, &mut g);
        let v = model.transform_v(&f).unwrap();
        let w = model.transform_w(&f).unwrap();
        for x in 0..model.len() {
            let psi = model.psi(x);
            assert!((v[x] - f.inner(&psi)).norm() <= 1e-13);
            let sp = model.frame_operator_inverse() * psi.to_vector();
            let dual = HilbertVector::from_vector(&sp);
            assert!((w[x] - f.inner(&dual)).norm() <= 1e-13 * f.norm().max(1.0));
        }
        assert_eq!(model.transform_v(&HilbertVector::zeros(4)).unwrap().max_abs(), 0.0);
        assert!(model.transform_v(&HilbertVector::zeros(3)).is_err());
    }

    #[test]
    fn w_of_psi_is_kernel_column() {
        let model = small_random_model();
        for y in [0, 5, 23] {
            let col = model.transform_w(&model.psi(y)).unwrap();
            for x in 0..model.len() {
                assert!((col[x] - model.kernel().get(x, y)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn range_and_parseval() {
        let model = small_random_model();
        let mut g = rng(2);
        for _ in 0..10 {
            let f = HilbertVector::random(4, &mut g);
            let h = HilbertVector::random(4, &mut g);
            let wf = model.transform_w(&f).unwrap();
            let rw = model.kernel().apply(model.space(), &wf).unwrap();
            assert!(rw.sub(&wf).unwrap().max_abs() <= 1e-11 * wf.max_abs().max(1.0));
            let vf = model.transform_v(&f).unwrap();
            let wh = model.transform_w(&h).unwrap();
            let pairing: Complex64 = (0..model.len()).map(|x| model.space().weight(x) * vf[x] * wh[x].conj()).sum();
            assert!((pairing - f.inner(&h)).norm() <= 1e-12 * f.norm() * h.norm());
            let back = model.v_inverse(&vf).unwrap();
            assert!(back.sub(&f).norm() <= 1e-11 * f.norm());
            let back = model.w_inverse(&wf).unwrap();
            assert!(back.sub(&f).norm() <= 1e-11 * f.norm());
        }
    }

    #[test]
    fn tight_frame_w_is_scaled_v() {
        let model = FrameModel::gabor(GaborParams { n_time: 8, n_freq: 8, window_width: 3.0, signal_len: None }).unwrap();
        let (a, b) = model.frame_bounds();
        assert!(b / a <= 1.0 + 1e-8);
        let f = HilbertVector::random(8, &mut rng(3));
        let v = model.transform_v(&f).unwrap();
        let w = model.transform_w(&f).unwrap();
        for x in 0..model.len() {
            assert!((w[x] - v[x] / a).norm() <= 1e-10);
        }
    }

    #[test]
    fn gabor_cases() {
        let one = FrameModel::gabor(GaborParams { n_time: 1, n_freq: 1, window_width: 1.0, signal_len: None }).unwrap();
        assert_eq!(one.dim(), 1);
        assert!(one.frame_operator()[(0, 0)].re > 0.0);
        assert!(FrameModel::gabor(GaborParams { n_time: 4, n_freq: 4, window_width: 0.0, signal_len: None }).is_err());
        let model = FrameModel::gabor(GaborParams { n_time: 16, n_freq: 16, window_width: 4.0, signal_len: None }).unwrap();
        let norm = model.kernel().schur_norm(model.space(), &Weight2D::constant_one(256)).unwrap();
        assert!(norm.is_finite() && norm >= 1.0);
        let over = FrameModel::gabor(GaborParams { n_time: 16, n_freq: 16, window_width: 2.0, signal_len: Some(8) }).unwrap();
        assert_eq!(over.dim(), 8);
        let (a, b) = over.frame_bounds();
        assert!(a > 0.0 && b / a < 1.0 + 1e-6);
    }

    #[test]
    fn random_smooth_determinism_and_spanning() {
        let a = FrameModel::random_smooth(6, 40, 2.0, 99).unwrap();
        let b = FrameModel::random_smooth(6, 40, 2.0, 99).unwrap();
        assert_eq!(a.psi_matrix(), b.psi_matrix());
        for seed in 0..20 {
            let m = FrameModel::random_smooth(5, 30, 1.0, seed).unwrap();
            assert!(m.frame_bounds().0 > 0.0);
            for x in 0..m.len() {
                assert!((m.psi(x).norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(FrameModel::random_smooth(8, 4, 1.0, 0).is_err());
    }

    #[test]
    fn orthonormal_kernel_is_identity() {
        let model = FrameModel::orthonormal(5).unwrap();
        assert_eq!(model.kernel(), &Kernel::quadrature_identity(model.space()));
    }

    #[test]
    fn synthesis_cases() {
        let model = small_random_model();
        let s = model.synthesize(&DiscreteMeasure::dirac(3)).unwrap();
        assert_eq!(s, model.psi(3));
        assert_eq!(model.synthesize(&DiscreteMeasure::default()).unwrap(), HilbertVector::zeros(4));
        let mut g = rng(4);
        let atoms: Vec<(usize, Complex64)> = (0..6)
            .map(|_| (g.random_range(0..24), Complex64::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0))))
            .collect();
        let nu = DiscreteMeasure::on_grid(atoms, 24).unwrap();
        let lhs = model.transform_v(&model.synthesize(&nu).unwrap()).unwrap();
        let rhs = model.gram_kernel().unwrap().apply_measure(&nu).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-13);
        assert!(model.synthesize(&DiscreteMeasure::dirac(24)).is_err());
    }

    #[test]
    fn psi_bytes_roundtrip() {
        let model = small_random_model();
        let bytes = model.psi_to_bytes();
        assert_eq!(&FrameModel::psi_from_bytes(&bytes).unwrap(), model.psi_matrix());
        assert!(FrameModel::psi_from_bytes(&bytes[..20]).is_err());
    }
}
