//! Dense Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default floor below which a frame operator counts as singular.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix. Only the
/// Hermitian part of `a` is used.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (a + a.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(a.nrows(), a.ncols());
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    hermitian_eigen(a).0
}

/// `V diag(f(lambda)) V^*` for a Hermitian matrix.
pub fn hermitian_function(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        let s = f(lam);
        scaled.column_mut(k).scale_mut(s);
    }
    &scaled * vectors.adjoint()
}

/// Inverse of a positive definite Hermitian matrix; refuses when the smallest
/// eigenvalue is not above `floor`.
pub fn hermitian_inverse(a: &CMatrix, floor: f64) -> Result<CMatrix> {
    let values = hermitian_eigenvalues(a);
    let min = values.first().copied().unwrap_or(0.0);
    if !(min > floor) {
        return Err(Error::Numerical(format!(
            "matrix not positive definite: smallest eigenvalue {min:e} <= floor {floor:e}"
        )));
    }
    let inv = hermitian_function(a, |l| 1.0 / l);
    Ok((&inv + inv.adjoint()).scale(0.5))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Euclidean norm of a complex slice.
pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hpd(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &a * a.adjoint() + CMatrix::identity(n, n)
    }

    #[test]
    fn eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hpd(7, &mut rng);
        let back = hermitian_function(&a, |l| l);
        assert!(max_abs_diff(&a, &back) < 1e-12);
        let vals = hermitian_eigenvalues(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(vals[0] >= 1.0 - 1e-12);
    }

    #[test]
    fn inverse_and_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hpd(6, &mut rng);
        let inv = hermitian_inverse(&a, EIGEN_FLOOR).unwrap();
        assert!(max_abs_diff(&(&a * &inv), &CMatrix::identity(6, 6)) < 1e-12);
        let singular = CMatrix::from_element(3, 3, Complex64::new(1.0, 0.0));
        assert!(hermitian_inverse(&singular, EIGEN_FLOOR).is_err());
    }
}
