//! Finite weighted point sets standing in for a measure space.
//!
//! Every integral over the index space becomes a weighted sum over the
//! points of a [`QuadratureSpace`]. Sums run in index order so results are
//! reproducible bit for bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Upper bound on the number of grid points accepted by the constructors.
pub const MAX_POINTS: usize = 4096;

/// Finite point set with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpec", into = "SpaceSpec")]
pub struct QuadratureSpace {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct SpaceSpec {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<SpaceSpec> for QuadratureSpace {
    type Error = Error;

    fn try_from(spec: SpaceSpec) -> Result<Self> {
        QuadratureSpace::new(spec.points, spec.weights)
    }
}

impl From<QuadratureSpace> for SpaceSpec {
    fn from(space: QuadratureSpace) -> Self {
        SpaceSpec {
            points: space.points,
            weights: space.weights,
        }
    }
}

impl QuadratureSpace {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_len("weights", points.len(), weights.len())?;
        if points.is_empty() {
            return Err(Error::InvalidInput("quadrature space has no points".into()));
        }
        if points.len() > MAX_POINTS {
            return Err(Error::InvalidInput(format!(
                "{} points exceeds the cap of {MAX_POINTS}",
                points.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("points need at least one coordinate".into()));
        }
        for p in &points {
            check_len("point coordinates", dim, p.len())?;
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("point coordinates"));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite("weights"));
            }
            if w <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {i} is {w}, weights must be strictly positive"
                )));
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
        for pair in order.windows(2) {
            if points[pair[0]] == points[pair[1]] {
                return Err(Error::InvalidInput(format!(
                    "duplicate point label at indices {} and {}",
                    pair[0].min(pair[1]),
                    pair[0].max(pair[1])
                )));
            }
        }
        Ok(Self {
            points,
            weights,
            dim,
        })
    }

    /// Uniform 1-D grid `x_k = start + k * step` with constant weight.
    pub fn uniform_1d(n: usize, start: f64, step: f64, weight: f64) -> Result<Self> {
        let points = (0..n).map(|k| vec![start + k as f64 * step]).collect();
        Self::new(points, vec![weight; n])
    }

    /// Product grid over the given axes, row-major with the last axis fastest.
    pub fn product_grid(axes: &[Vec<f64>], weight: f64) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidInput("product grid needs nonempty axes".into()));
        }
        let total: usize = axes.iter().map(|a| a.len()).product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            points.push(idx.iter().zip(axes).map(|(&k, a)| a[k]).collect());
            for ax in (0..axes.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < axes[ax].len() {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::new(points, vec![weight; total])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of coordinates per point.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    /// Weighted sum `sum_x w_x f(x)`.
    pub fn integrate(&self, f: &GridFunction) -> Result<Complex64> {
        check_len("grid function", self.len(), f.len())?;
        Ok(self
            .weights
            .iter()
            .zip(f.values())
            .fold(Complex64::new(0.0, 0.0), |acc, (&w, &v)| acc + v * w))
    }

    /// Weighted sum of a real-valued function.
    pub fn integrate_real(&self, f: &[f64]) -> Result<f64> {
        check_len("real grid function", self.len(), f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }

    /// Measure of a subset given by point indices. Duplicate indices count once.
    pub fn subset_measure(&self, subset: &[usize]) -> Result<f64> {
        let mut seen = vec![false; self.len()];
        let mut total = 0.0;
        for &i in subset {
            if i >= self.len() {
                return Err(Error::InvalidIndex {
                    index: i,
                    len: self.len(),
                });
            }
            if !seen[i] {
                seen[i] = true;
                total += self.weights[i];
            }
        }
        Ok(total)
    }

    /// Total measure of the space.
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Sorted distinct coordinate values along `axis`.
    pub fn axis_values(&self, axis: usize) -> Vec<f64> {
        let mut vals: Vec<f64> = self.points.iter().map(|p| p[axis]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// One complex value per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn constant(n: usize, value: Complex64) -> Self {
        Self::new(vec![value; n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Indicator function of a subset of `0..n`.
    pub fn indicator(n: usize, subset: &[usize]) -> Self {
        let mut f = Self::zeros(n);
        for &i in subset {
            f.values[i] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Pointwise modulus.
    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self::new(self.values.iter().map(|v| v * alpha).collect())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: Complex64, other: &GridFunction) -> Result<Self> {
        check_len("grid function", self.len(), other.len())?;
        Ok(Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Largest pointwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = Complex64;

    fn index(&self, index: usize) -> &Complex64 {
        &self.values[index]
    }
}
