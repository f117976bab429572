//! Dense kernels on `X x X` and the weighted Schur algebra `A_m`.
//!
//! A kernel acts on grid functions through the quadrature,
//! `(K f)(x) = sum_y w_y K(x, y) f(y)`, and on discrete measures without
//! quadrature weights. The `A_m` norm is the larger of the two weighted
//! Schur integrals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::quadrature::{GridFunction, QuadratureSpace};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Complex kernel stored densely, `entries[(x, y)] = K(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    entries: DMatrix<Complex64>,
}

impl Kernel {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension {
                what: "kernel columns",
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("kernel entries"));
        }
        Ok(Self { entries })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |x, y| f(x, y)))
    }

    pub fn from_real_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_fn(n, |x, y| Complex64::new(f(x, y), 0.0))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::from_element(n, n, ZERO),
        }
    }

    /// The identity of the quadrature: `delta_{x=y} / w_x`.
    pub fn quadrature_identity(space: &QuadratureSpace) -> Self {
        let n = space.len();
        let mut entries = DMatrix::from_element(n, n, ZERO);
        for x in 0..n {
            entries[(x, x)] = Complex64::new(1.0 / space.weight(x), 0.0);
        }
        Self { entries }
    }

    /// Number of grid points the kernel lives on.
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.entries[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// Entry-wise modulus `|K|`.
    pub fn abs(&self) -> Kernel {
        Kernel {
            entries: self.entries.map(|v| Complex64::new(v.norm(), 0.0)),
        }
    }

    /// `K*(x, y) = conj(K(y, x))`.
    pub fn involution(&self) -> Kernel {
        Kernel {
            entries: self.entries.adjoint(),
        }
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel> {
        check_len("kernel", self.size(), other.size())?;
        Ok(Kernel {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &Kernel) -> Result<Kernel> {
        check_len("kernel", self.size(), other.size())?;
        Ok(Kernel {
            entries: &self.entries - &other.entries,
        })
    }

    pub fn scale(&self, alpha: Complex64) -> Kernel {
        Kernel {
            entries: &self.entries * alpha,
        }
    }

    /// `(K f)(x) = sum_y w_y K(x, y) f(y)`.
    pub fn apply(&self, space: &QuadratureSpace, f: &GridFunction) -> Result<GridFunction> {
        let n = self.size();
        check_len("kernel vs space", n, space.len())?;
        check_len("grid function", n, f.len())?;
        let wf: Vec<Complex64> = f
            .values()
            .iter()
            .zip(space.weights())
            .map(|(v, &w)| v * w)
            .collect();
        let mut out = vec![ZERO; n];
        // column-major storage: accumulate column by column, same order for every x
        for (y, &c) in wf.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let col = self.entries.column(y);
            for (o, k) in out.iter_mut().zip(col.iter()) {
                *o += k * c;
            }
        }
        Ok(GridFunction::new(out))
    }

    /// `(K nu)(x) = sum_i lambda_i K(x, x_i)`, no quadrature weights on atoms.
    pub fn apply_measure(&self, nu: &DiscreteMeasure) -> Result<GridFunction> {
        let n = self.size();
        let mut out = vec![ZERO; n];
        for &(idx, coeff) in nu.atoms() {
            if idx >= n {
                return Err(Error::InvalidIndex { index: idx, len: n });
            }
            let col = self.entries.column(idx);
            for (o, k) in out.iter_mut().zip(col.iter()) {
                *o += k * coeff;
            }
        }
        Ok(GridFunction::new(out))
    }

    /// `(K1 o K2)(x, y) = sum_z w_z K1(x, z) K2(z, y)`.
    pub fn compose(&self, other: &Kernel, space: &QuadratureSpace) -> Result<Kernel> {
        check_len("kernel", self.size(), other.size())?;
        check_len("kernel vs space", self.size(), space.len())?;
        let mut scaled = self.entries.clone();
        for (z, &w) in space.weights().iter().enumerate() {
            scaled.column_mut(z).scale_mut(w);
        }
        Kernel::new(scaled * &other.entries)
    }

    /// Row and column Schur integrals
    /// `sum_y w_y |K(x,y)| m(x,y)` and `sum_x w_x |K(x,y)| m(x,y)`.
    pub fn schur_integrals(
        &self,
        space: &QuadratureSpace,
        weight: &Weight2D,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.size();
        check_len("kernel vs space", n, space.len())?;
        check_len("kernel vs weight", n, weight.size())?;
        let w = space.weights();
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for y in 0..n {
            let mut col_sum = 0.0;
            for x in 0..n {
                let a = self.entries[(x, y)].norm() * weight.get(x, y);
                rows[x] += w[y] * a;
                col_sum += w[x] * a;
            }
            cols[y] = col_sum;
        }
        Ok((rows, cols))
    }

    /// The `A_m` norm: max of the supremum of row integrals and of column integrals.
    pub fn schur_norm(&self, space: &QuadratureSpace, weight: &Weight2D) -> Result<f64> {
        let (rows, cols) = self.schur_integrals(space, weight)?;
        let r = rows.iter().copied().fold(0.0, f64::max);
        let c = cols.iter().copied().fold(0.0, f64::max);
        Ok(r.max(c))
    }

    /// Row-major `[[re, im], ...]` JSON document with the size.
    pub fn to_json(&self) -> Result<String> {
        let doc = KernelDoc {
            n: self.size(),
            entries: self.row_major().iter().map(|v| [v.re, v.im]).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: KernelDoc = serde_json::from_str(text)?;
        check_len("kernel entries", doc.n * doc.n, doc.entries.len())?;
        let vals: Vec<Complex64> = doc.entries.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        Kernel::new(DMatrix::from_row_slice(doc.n, doc.n, &vals))
    }

    /// Flat binary fixture: row-major complex pairs as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        complex_to_bytes(&self.row_major())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let vals = complex_from_bytes(bytes)?;
        let n = (vals.len() as f64).sqrt().round() as usize;
        if n * n != vals.len() {
            return Err(Error::InvalidInput(format!(
                "{} complex entries do not form a square kernel",
                vals.len()
            )));
        }
        Kernel::new(DMatrix::from_row_slice(n, n, &vals))
    }

    fn row_major(&self) -> Vec<Complex64> {
        self.entries.transpose().as_slice().to_vec()
    }
}

#[derive(Serialize, Deserialize)]
struct KernelDoc {
    n: usize,
    entries: Vec<[f64; 2]>,
}

pub fn complex_to_bytes(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn complex_from_bytes(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::InvalidInput(format!(
            "binary fixture length {} is not a multiple of 16",
            bytes.len()
        )));
    }
    let vals: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("binary fixture"));
    }
    Ok(vals)
}

/// Symmetric positive weight `m` on `X x X` together with a reference point
/// `z` defining the one-variable weight `v(x) = m(x, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight2D {
    m: DMatrix<f64>,
    reference: usize,
}

impl Weight2D {
    /// The trivial weight `m = 1`.
    pub fn constant_one(n: usize) -> Self {
        Self {
            m: DMatrix::from_element(n, n, 1.0),
            reference: 0,
        }
    }

    /// Weight associated to a positive function: `m(x,y) = max{w(x)/w(y), w(y)/w(x)}`.
    pub fn from_weight(w: &[f64], reference: usize) -> Result<Self> {
        let n = w.len();
        if reference >= n {
            return Err(Error::InvalidIndex {
                index: reference,
                len: n,
            });
        }
        if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidInput("weight function must be positive and finite".into()));
        }
        let m = DMatrix::from_fn(n, n, |x, y| (w[x] / w[y]).max(w[y] / w[x]));
        Ok(Self { m, reference })
    }

    /// User-supplied table; must be symmetric, finite and positive.
    pub fn from_matrix(m: DMatrix<f64>, reference: usize) -> Result<Self> {
        let n = m.nrows();
        check_len("weight columns", n, m.ncols())?;
        if reference >= n {
            return Err(Error::InvalidIndex {
                index: reference,
                len: n,
            });
        }
        for x in 0..n {
            for y in 0..n {
                let v = m[(x, y)];
                if !v.is_finite() {
                    return Err(Error::NonFinite("weight table"));
                }
                if v <= 0.0 {
                    return Err(Error::InvalidInput("weight table must be positive".into()));
                }
                if v != m[(y, x)] {
                    return Err(Error::InvalidInput(format!(
                        "weight table is not symmetric at ({x}, {y})"
                    )));
                }
            }
        }
        Ok(Self { m, reference })
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.m[(x, y)]
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    /// `v(x) = m(x, z)`.
    pub fn v(&self, x: usize) -> f64 {
        self.m[(x, self.reference)]
    }

    pub fn v_values(&self) -> Vec<f64> {
        (0..self.size()).map(|x| self.v(x)).collect()
    }

    /// Worst ratio `m(x,y) / (m(x,z) m(z,y))` over all triples; at most 1
    /// when `m` is submultiplicative through every point.
    pub fn submultiplicativity_ratio(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    worst = worst.max(self.m[(x, y)] / (self.m[(x, z)] * self.m[(z, y)]));
                }
            }
        }
        worst
    }
}

/// Finite combination of Dirac measures `sum_i lambda_i eps_{x_i}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(usize, Complex64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(usize, Complex64)>) -> Self {
        Self { atoms }
    }

    pub fn dirac(index: usize) -> Self {
        Self::new(vec![(index, Complex64::new(1.0, 0.0))])
    }

    /// Checked constructor against a grid of `n` points.
    pub fn on_grid(atoms: Vec<(usize, Complex64)>, n: usize) -> Result<Self> {
        for &(i, _) in &atoms {
            if i >= n {
                return Err(Error::InvalidIndex { index: i, len: n });
            }
        }
        Ok(Self::new(atoms))
    }

    pub fn atoms(&self) -> &[(usize, Complex64)] {
        &self.atoms
    }

    /// Coefficients merged per grid point (duplicate atoms add).
    pub fn merged(&self, n: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; n];
        for &(i, c) in &self.atoms {
            if i >= n {
                return Err(Error::InvalidIndex { index: i, len: n });
            }
            out[i] += c;
        }
        Ok(out)
    }

    /// Total variation `|nu|(A)` of a point subset.
    pub fn variation_on(&self, subset: &[usize], n: usize) -> Result<f64> {
        let merged = self.merged(n)?;
        let mut seen = vec![false; n];
        let mut total = 0.0;
        for &i in subset {
            if i >= n {
                return Err(Error::InvalidIndex { index: i, len: n });
            }
            if !seen[i] {
                seen[i] = true;
                total += merged[i].norm();
            }
        }
        Ok(total)
    }
}
