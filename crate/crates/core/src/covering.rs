//! Discrete coverings of the grid, their overlap and moderateness
//! constants, partitions of unity, and m-equivalence of coverings.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::{Kernel, Weight2D};
use crate::quadrature::QuadratureSpace;

/// Indexed family of point subsets `(U_i)_{i in I}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Covering {
    sets: Vec<Vec<usize>>,
    n_points: usize,
    membership: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct CoveringDoc {
    sets: Vec<Vec<usize>>,
}

impl Covering {
    /// Builds a covering of `n_points` grid points. Indices are sorted and
    /// deduplicated per set; coverage is checked by [`Covering::validate`].
    pub fn new(sets: Vec<Vec<usize>>, n_points: usize) -> Result<Self> {
        let mut sets = sets;
        for set in &mut sets {
            for &x in set.iter() {
                if x >= n_points {
                    return Err(Error::InvalidIndex {
                        index: x,
                        len: n_points,
                    });
                }
            }
            set.sort_unstable();
            set.dedup();
        }
        let mut membership = vec![Vec::new(); n_points];
        for (i, set) in sets.iter().enumerate() {
            for &x in set {
                membership[x].push(i);
            }
        }
        let neighbors = sets
            .iter()
            .map(|set| {
                let mut nb: Vec<usize> = set.iter().flat_map(|&x| membership[x].iter().copied()).collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        Ok(Self {
            sets,
            n_points,
            membership,
            neighbors,
        })
    }

    /// Every point in its own set.
    pub fn singletons(n_points: usize) -> Self {
        Self::new((0..n_points).map(|x| vec![x]).collect(), n_points).expect("indices in range")
    }

    pub fn from_json(text: &str, n_points: usize) -> Result<Self> {
        let doc: CoveringDoc = serde_json::from_str(text)?;
        Self::new(doc.sets, n_points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CoveringDoc {
            sets: self.sets.clone(),
        })?)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    /// Indices `i` with `x in U_i`.
    pub fn containing(&self, x: usize) -> &[usize] {
        &self.membership[x]
    }

    /// `i* = { j : U_i and U_j intersect }`, including `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `Q_y`: union of all sets containing `y`, sorted.
    pub fn q_neighborhood(&self, y: usize) -> Vec<usize> {
        let mut q: Vec<usize> = self.membership[y]
            .iter()
            .flat_map(|&i| self.sets[i].iter().copied())
            .collect();
        q.sort_unstable();
        q.dedup();
        q
    }

    /// True when every set is a single point.
    pub fn is_singleton(&self) -> bool {
        self.sets.iter().all(|s| s.len() == 1)
    }

    /// Largest number of sets containing a single point.
    pub fn max_pointwise_overlap(&self) -> usize {
        self.membership.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn measures(&self, space: &QuadratureSpace) -> Result<Vec<f64>> {
        check_len("covering vs space", self.n_points, space.len())?;
        self.sets.iter().map(|s| space.subset_measure(s)).collect()
    }

    /// Stable identifier: FNV-1a hash of the index sets.
    pub fn id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.n_points as u64);
        for set in &self.sets {
            feed(u64::MAX);
            for &x in set {
                feed(x as u64);
            }
        }
        format!("cov-{}x{}-{h:016x}", self.sets.len(), self.n_points)
    }

    /// Overlap number `N`, lower measure bound `D` and moderateness constant
    /// `C~`, all by enumeration.
    pub fn validate(&self, space: &QuadratureSpace) -> Result<CoveringReport> {
        let measures = self.measures(space)?;
        let uncovered: Vec<usize> = (0..self.n_points)
            .filter(|&x| self.membership[x].is_empty())
            .collect();
        let empty_sets: Vec<usize> = (0..self.len()).filter(|&i| self.sets[i].is_empty()).collect();
        let overlap = self.neighbors.iter().map(Vec::len).max().unwrap_or(0);
        let min_measure = measures.iter().copied().fold(f64::INFINITY, f64::min);
        let mut c_tilde: f64 = if self.is_empty() { f64::INFINITY } else { 1.0 };
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                c_tilde = c_tilde.max(measures[i] / measures[j]);
            }
        }
        let admissible = !self.is_empty() && uncovered.is_empty() && empty_sets.is_empty();
        let moderate = admissible && min_measure > 0.0 && c_tilde.is_finite();
        Ok(CoveringReport {
            admissible,
            moderate,
            n_sets: self.len(),
            overlap,
            min_measure: if min_measure.is_finite() { min_measure } else { 0.0 },
            c_tilde,
            c_mu: None,
            uncovered,
            empty_sets,
        })
    }

    /// `C_{m,U} = max_i max_{x,y in U_i} m(x,y)`.
    pub fn weight_compatibility(&self, weight: &Weight2D) -> Result<f64> {
        check_len("covering vs weight", self.n_points, weight.size())?;
        let mut c: f64 = 1.0;
        for set in &self.sets {
            for &x in set {
                for &y in set {
                    c = c.max(weight.get(x, y));
                }
            }
        }
        Ok(c)
    }
}

/// Enumerated covering constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub admissible: bool,
    pub moderate: bool,
    pub n_sets: usize,
    #[serde(rename = "N")]
    pub overlap: usize,
    #[serde(rename = "D")]
    pub min_measure: f64,
    #[serde(rename = "C_tilde")]
    pub c_tilde: f64,
    #[serde(rename = "C_mU")]
    pub c_mu: Option<f64>,
    pub uncovered: Vec<usize>,
    pub empty_sets: Vec<usize>,
}

/// Window length and overlap along one coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisWindow {
    pub width: f64,
    pub overlap: f64,
}

/// Sliding half-open windows `[a + k s, a + k s + width)` with stride
/// `s = width - overlap` on every axis; sets are the products of windows.
pub fn uniform_covering(space: &QuadratureSpace, width: f64, overlap: f64) -> Result<Covering> {
    let axes = vec![AxisWindow { width, overlap }; space.dim()];
    uniform_covering_axes(space, &axes)
}

/// Per-axis variant of [`uniform_covering`].
pub fn uniform_covering_axes(space: &QuadratureSpace, axes: &[AxisWindow]) -> Result<Covering> {
    check_len("axis windows", space.dim(), axes.len())?;
    let mut per_axis: Vec<Vec<Vec<usize>>> = Vec::with_capacity(axes.len());
    let mut window_counts = Vec::with_capacity(axes.len());
    for (ax, win) in axes.iter().enumerate() {
        if !(win.width > 0.0) || !(win.overlap >= 0.0) || win.overlap >= win.width {
            return Err(Error::InvalidInput(format!(
                "axis {ax}: need width > 0 and 0 <= overlap < width, got {} / {}",
                win.width, win.overlap
            )));
        }
        let vals = space.axis_values(ax);
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        let eps = 1e-9 * (hi - lo).abs().max(1.0);
        let stride = win.width - win.overlap;
        let mut starts = Vec::new();
        loop {
            let s = lo + starts.len() as f64 * stride;
            starts.push(s);
            if s + win.width > hi + eps {
                break;
            }
        }
        let windows_of = |c: f64| -> Vec<usize> {
            starts
                .iter()
                .enumerate()
                .filter(|&(_, &s)| c >= s - eps && c < s + win.width - eps)
                .map(|(k, _)| k)
                .collect()
        };
        per_axis.push((0..space.len()).map(|x| windows_of(space.point(x)[ax])).collect());
        window_counts.push(starts.len());
    }
    let mut buckets: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for x in 0..space.len() {
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for lists in &per_axis {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    lists[x].iter().map(move |&k| {
                        let mut t = t.clone();
                        t.push(k);
                        t
                    })
                })
                .collect();
        }
        for t in tuples {
            buckets.entry(t).or_default().push(x);
        }
    }
    let expected: usize = window_counts.iter().product();
    if buckets.len() != expected {
        return Err(Error::InvalidInput(format!(
            "degenerate covering: {} of {expected} windows are empty",
            expected - buckets.len()
        )));
    }
    Covering::new(buckets.into_values().collect(), space.len())
}

/// Flavor of partition of unity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PouKind {
    /// `phi_i = chi_{U_i} / #{j : x in U_j}`.
    Flat,
    /// Normalized distance bumps supported in `U_i`.
    Smooth,
}

/// Partition of unity subordinate to a covering, stored on the set supports.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    values: Vec<Vec<f64>>,
    supports: Vec<Vec<usize>>,
    c: Vec<f64>,
    n_points: usize,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `c_i = integral of phi_i`.
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// `(point, phi_i(point))` pairs over `U_i`.
    pub fn support(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.supports[i].iter().copied().zip(self.values[i].iter().copied())
    }

    pub fn value(&self, i: usize, x: usize) -> f64 {
        match self.supports[i].binary_search(&x) {
            Ok(k) => self.values[i][k],
            Err(_) => 0.0,
        }
    }

    pub fn dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_points];
        for (x, v) in self.support(i) {
            out[x] = v;
        }
        out
    }

    /// Pointwise `sum_i phi_i(x)`.
    pub fn sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_points];
        for i in 0..self.len() {
            for (x, v) in self.support(i) {
                out[x] += v;
            }
        }
        out
    }
}

pub fn build_pou(cov: &Covering, space: &QuadratureSpace, kind: PouKind) -> Result<PartitionOfUnity> {
    check_len("covering vs space", cov.n_points(), space.len())?;
    if let Some(x) = (0..cov.n_points()).find(|&x| cov.containing(x).is_empty()) {
        return Err(Error::Uncovered(x));
    }
    if let Some(i) = (0..cov.len()).find(|&i| cov.set(i).is_empty()) {
        return Err(Error::InvalidInput(format!("covering set {i} is empty")));
    }
    let raw: Vec<Vec<f64>> = match kind {
        PouKind::Flat => cov.sets().iter().map(|s| vec![1.0; s.len()]).collect(),
        PouKind::Smooth => cov.sets().iter().map(|s| bump_values(space, s)).collect(),
    };
    let mut total = vec![0.0; cov.n_points()];
    for (set, vals) in cov.sets().iter().zip(&raw) {
        for (&x, &v) in set.iter().zip(vals) {
            total[x] += v;
        }
    }
    let values: Vec<Vec<f64>> = cov
        .sets()
        .iter()
        .zip(&raw)
        .map(|(set, vals)| set.iter().zip(vals).map(|(&x, &v)| v / total[x]).collect())
        .collect();
    let c = cov
        .sets()
        .iter()
        .zip(&values)
        .map(|(set, vals)| set.iter().zip(vals).map(|(&x, &v)| v * space.weight(x)).sum())
        .collect();
    Ok(PartitionOfUnity {
        values,
        supports: cov.sets().to_vec(),
        c,
        n_points: cov.n_points(),
    })
}

fn bump_values(space: &QuadratureSpace, set: &[usize]) -> Vec<f64> {
    let dim = space.dim();
    let mut center = vec![0.0; dim];
    for &x in set {
        for (c, v) in center.iter_mut().zip(space.point(x)) {
            *c += v / set.len() as f64;
        }
    }
    let dist = |x: usize| -> f64 {
        space
            .point(x)
            .iter()
            .zip(&center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let radius = set.iter().map(|&x| dist(x)).fold(0.0, f64::max);
    if radius == 0.0 {
        return vec![1.0; set.len()];
    }
    // support radius 1.5x the set radius keeps every member strictly positive
    let support = 1.5 * radius;
    set.iter()
        .map(|&x| {
            let t = dist(x) / support;
            (1.0 - t * t).powi(2)
        })
        .collect()
}

/// Constants of m-equivalence between two coverings over the same index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    #[serde(rename = "C_1")]
    pub c1: f64,
    #[serde(rename = "C_2")]
    pub c2: f64,
    #[serde(rename = "C_prime")]
    pub c_prime: f64,
}

pub fn check_m_equivalent(
    cov_u: &Covering,
    cov_v: &Covering,
    weight: &Weight2D,
    space: &QuadratureSpace,
) -> Result<EquivalenceReport> {
    check_len("index sets", cov_u.len(), cov_v.len())?;
    check_len("covering vs weight", cov_u.n_points(), weight.size())?;
    let mu = cov_u.measures(space)?;
    let mv = cov_v.measures(space)?;
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut c_prime: f64 = 0.0;
    for i in 0..cov_u.len() {
        let ratio = mv[i] / mu[i];
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
        for &x in cov_u.set(i) {
            for &y in cov_v.set(i) {
                c_prime = c_prime.max(weight.get(x, y));
            }
        }
    }
    let equivalent = c1.is_finite() && c1 > 0.0 && c2.is_finite() && c_prime.is_finite();
    Ok(EquivalenceReport {
        equivalent,
        c1,
        c2,
        c_prime,
    })
}

/// `L(x,y) = sum_j chi_{U_j}(x) chi_{V_j}(y) / mu(V_j)`.
pub fn equivalence_kernel(cov_u: &Covering, cov_v: &Covering, space: &QuadratureSpace) -> Result<Kernel> {
    check_len("index sets", cov_u.len(), cov_v.len())?;
    let mv = cov_v.measures(space)?;
    let n = space.len();
    let mut k = vec![0.0; n * n];
    for j in 0..cov_u.len() {
        let inv = 1.0 / mv[j];
        for &x in cov_u.set(j) {
            for &y in cov_v.set(j) {
                k[x * n + y] += inv;
            }
        }
    }
    Kernel::from_real_fn(n, |x, y| k[x * n + y])
}

/// `K_pi(x,y) = sum_i chi_{U_{pi^-1(i)}}(x) chi_{U_i}(y) / mu(U_{pi^-1(i)})`.
pub fn permutation_kernel(cov: &Covering, space: &QuadratureSpace, pi: &[usize]) -> Result<Kernel> {
    check_len("permutation", cov.len(), pi.len())?;
    let mu = cov.measures(space)?;
    let n = space.len();
    let mut k = vec![0.0; n * n];
    // j = pi^-1(i)  <=>  i = pi(j)
    for (j, &i) in pi.iter().enumerate() {
        let inv = 1.0 / mu[j];
        for &x in cov.set(j) {
            for &y in cov.set(i) {
                k[x * n + y] += inv;
            }
        }
    }
    Kernel::from_real_fn(n, |x, y| k[x * n + y])
}

/// `K+(x,y) = sum_i sum_{j in i*} chi_{U_i}(x) chi_{U_j}(y) / mu(U_i)`, which
/// dominates the neighbor-sum map `lambda -> lambda+` on the natural norm.
pub fn neighbor_sum_kernel(cov: &Covering, space: &QuadratureSpace) -> Result<Kernel> {
    let mu = cov.measures(space)?;
    let n = space.len();
    let mut k = vec![0.0; n * n];
    for i in 0..cov.len() {
        let inv = 1.0 / mu[i];
        for &j in cov.neighbors(i) {
            for &x in cov.set(i) {
                for &y in cov.set(j) {
                    k[x * n + y] += inv;
                }
            }
        }
    }
    Kernel::from_real_fn(n, |x, y| k[x * n + y])
}

/// `K(x,y) = chi_A(x) chi_B(y)`.
pub fn indicator_product_kernel(n: usize, a: &[usize], b: &[usize]) -> Result<Kernel> {
    let mut k = vec![0.0; n * n];
    for &x in a {
        for &y in b {
            k[x * n + y] = 1.0;
        }
    }
    Kernel::from_real_fn(n, |x, y| k[x * n + y])
}

/// Whether `pi` is a bijection with `pi(i) in i*` for all `i`.
pub fn is_admissible_permutation(cov: &Covering, pi: &[usize]) -> bool {
    if pi.len() != cov.len() {
        return false;
    }
    let mut seen = vec![false; pi.len()];
    for (i, &p) in pi.iter().enumerate() {
        if p >= pi.len() || seen[p] || cov.neighbors(i).binary_search(&p).is_err() {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// The identity followed by `count` admissible permutations produced by a
/// random walk of admissible transpositions.
pub fn sample_admissible_permutations<R: Rng>(cov: &Covering, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = cov.len();
    let identity: Vec<usize> = (0..n).collect();
    let mut out = vec![identity.clone()];
    if n == 0 {
        return out;
    }
    let mut pi = identity;
    for _ in 0..count {
        for _ in 0..(4 * n).max(8) {
            let i = rng.random_range(0..n);
            let nb = cov.neighbors(i);
            let j = nb[rng.random_range(0..nb.len())];
            let (pi_i, pi_j) = (pi[i], pi[j]);
            if cov.neighbors(i).binary_search(&pi_j).is_ok() && cov.neighbors(j).binary_search(&pi_i).is_ok() {
                pi.swap(i, j);
            }
        }
        out.push(pi.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> QuadratureSpace {
        QuadratureSpace::uniform_1d(n, 0.0, 1.0, 1.0).unwrap()
    }

    fn brute_constants(cov: &Covering, space: &QuadratureSpace) -> (usize, f64, f64) {
        let mu: Vec<f64> = cov.sets().iter().map(|s| s.iter().map(|&x| space.weight(x)).sum()).collect();
        let meets = |i: usize, j: usize| cov.set(i).iter().any(|x| cov.set(j).contains(x));
        let mut n_max = 0;
        let mut c = 0.0f64;
        for j in 0..cov.len() {
            let mut cnt = 0;
            for i in 0..cov.len() {
                if meets(i, j) {
                    cnt += 1;
                    c = c.max(mu[i] / mu[j]);
                }
            }
            n_max = n_max.max(cnt);
        }
        (n_max, mu.iter().copied().fold(f64::INFINITY, f64::min), c)
    }

    #[test]
    fn partition_and_duplicate_cases() {
        let s = line(6);
        let part = Covering::singletons(6);
        let r = part.validate(&s).unwrap();
        assert!(r.admissible && r.moderate);
        assert_eq!((r.overlap, r.c_tilde), (1, 1.0));
        let dup = Covering::new(vec![(0..6).collect(), (0..6).collect()], 6).unwrap();
        let r = dup.validate(&s).unwrap();
        assert_eq!((r.overlap, r.c_tilde), (2, 1.0));
    }

    #[test]
    fn uncovered_point_is_reported() {
        let s = line(4);
        let cov = Covering::new(vec![vec![0, 1], vec![2]], 4).unwrap();
        let r = cov.validate(&s).unwrap();
        assert!(!r.admissible && !r.moderate);
        assert_eq!(r.uncovered, vec![3]);
        assert!(matches!(build_pou(&cov, &s, PouKind::Flat), Err(Error::Uncovered(3))));
        assert!(Covering::new(vec![vec![9]], 4).is_err());
    }

    #[test]
    fn random_interval_covering_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let weights: Vec<f64> = (0..64).map(|_| rng.random_range(0.5..1.5)).collect();
        let s = QuadratureSpace::new((0..64).map(|k| vec![k as f64]).collect(), weights).unwrap();
        for _ in 0..10 {
            let mut sets = Vec::new();
            let mut start = 0usize;
            while start < 64 {
                let len = rng.random_range(1..8);
                let back = if start > 0 { rng.random_range(0..start.min(3) + 1) } else { 0 };
                let a = start - back;
                let b = (start + len).min(64);
                sets.push((a..b).collect::<Vec<_>>());
                start = b;
            }
            let cov = Covering::new(sets, 64).unwrap();
            let r = cov.validate(&s).unwrap();
            let (n, d, c) = brute_constants(&cov, &s);
            assert_eq!(r.overlap, n);
            assert_eq!(r.min_measure, d);
            assert_eq!(r.c_tilde, c);
            for x in 0..64 {
                assert!(cov.containing(x).len() <= r.overlap);
            }
        }
    }

    #[test]
    fn weight_compatibility_cases() {
        let s = line(10);
        let cov = uniform_covering(&s, 3.0, 0.0).unwrap();
        assert_eq!(cov.weight_compatibility(&Weight2D::constant_one(10)).unwrap(), 1.0);
        let w: Vec<f64> = (0..10).map(|k| (k as f64 * 0.3).exp()).collect();
        let m = Weight2D::from_weight(&w, 0).unwrap();
        assert_eq!(Covering::singletons(10).weight_compatibility(&m).unwrap(), 1.0);
        // grid on [0,1) with step 1/32 and sets of 4 points: length h = 3/32 between extremes
        let h = 1.0 / 32.0;
        let s = QuadratureSpace::uniform_1d(32, 0.0, h, h).unwrap();
        let w: Vec<f64> = s.points().iter().map(|p| p[0].exp()).collect();
        let m = Weight2D::from_weight(&w, 0).unwrap();
        let cov = uniform_covering(&s, 4.0 * h, 0.0).unwrap();
        let mut brute: f64 = 0.0;
        for set in cov.sets() {
            for &x in set {
                for &y in set {
                    brute = brute.max((w[x] / w[y]).max(w[y] / w[x]));
                }
            }
        }
        let got = cov.weight_compatibility(&m).unwrap();
        assert_eq!(got, brute);
        assert!((got - (3.0 * h).exp()).abs() < 1e-12);
    }

    #[test]
    fn uniform_covering_cases() {
        let s = line(64);
        let whole = uniform_covering(&s, 64.0, 0.0).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole.validate(&s).unwrap().overlap, 1);
        let single = uniform_covering(&s, 1.0, 0.0).unwrap();
        assert!(single.is_singleton());
        assert_eq!(single.len(), 64);
        let twice = uniform_covering(&s, 4.0, 2.0).unwrap();
        for x in 2..62 {
            assert_eq!(twice.containing(x).len(), 2, "point {x}");
        }
        assert!(twice.validate(&s).unwrap().moderate);
        assert!(uniform_covering(&s, 2.0, 2.0).is_err());
        let gappy = QuadratureSpace::new(vec![vec![0.0], vec![1.0], vec![5.0]], vec![1.0; 3]).unwrap();
        assert!(uniform_covering(&gappy, 1.0, 0.0).is_err());
    }

    #[test]
    fn product_covering_on_grid() {
        let axes = vec![(0..8).map(f64::from).collect::<Vec<_>>(), (0..6).map(f64::from).collect()];
        let s = QuadratureSpace::product_grid(&axes, 1.0).unwrap();
        let cov = uniform_covering_axes(
            &s,
            &[AxisWindow { width: 2.0, overlap: 0.0 }, AxisWindow { width: 3.0, overlap: 0.0 }],
        )
        .unwrap();
        assert_eq!(cov.len(), 4 * 2);
        assert!(cov.sets().iter().all(|s| s.len() == 6));
        assert_eq!(cov.max_pointwise_overlap(), 1);
    }

    #[test]
    fn flat_pou_cases() {
        let s = line(5);
        let part = Covering::new(vec![vec![0, 1], vec![2, 3, 4]], 5).unwrap();
        let pou = build_pou(&part, &s, PouKind::Flat).unwrap();
        assert_eq!(pou.c(), &[2.0, 3.0]);
        assert_eq!(pou.dense(0), vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        let two = Covering::new(vec![vec![0, 1, 2], vec![2, 3, 4]], 5).unwrap();
        let pou = build_pou(&two, &s, PouKind::Flat).unwrap();
        assert_eq!(pou.value(0, 2), 0.5);
        assert_eq!(pou.value(1, 2), 0.5);
    }

    #[test]
    fn pou_invariants_hold_for_both_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let weights: Vec<f64> = (0..40).map(|_| rng.random_range(0.2..2.0)).collect();
        let s = QuadratureSpace::new((0..40).map(|k| vec![k as f64 * 0.5]).collect(), weights).unwrap();
        let cov = uniform_covering(&s, 3.0, 1.5).unwrap();
        let mu = cov.measures(&s).unwrap();
        for kind in [PouKind::Flat, PouKind::Smooth] {
            let pou = build_pou(&cov, &s, kind).unwrap();
            for (x, total) in pou.sum().iter().enumerate() {
                assert!((total - 1.0).abs() <= 1e-14, "{kind:?} at {x}: {total}");
            }
            for i in 0..cov.len() {
                let dense = pou.dense(i);
                for (x, &v) in dense.iter().enumerate() {
                    assert!((0.0..=1.0).contains(&v));
                    if !cov.set(i).contains(&x) {
                        assert_eq!(v, 0.0);
                    }
                }
                assert!(pou.c()[i] > 0.0 && pou.c()[i] <= mu[i] * (1.0 + 1e-15));
            }
            let total: f64 = pou.c().iter().sum();
            assert!((total - s.total_measure()).abs() <= 1e-12 * s.total_measure());
        }
    }

    #[test]
    fn m_equivalence_cases() {
        let s = line(12);
        let w: Vec<f64> = (0..12).map(|k| (k as f64 * 0.2).exp()).collect();
        let m = Weight2D::from_weight(&w, 0).unwrap();
        let u = uniform_covering(&s, 3.0, 0.0).unwrap();
        let r = check_m_equivalent(&u, &u, &m, &s).unwrap();
        assert_eq!((r.c1, r.c2), (1.0, 1.0));
        assert_eq!(r.c_prime, u.weight_compatibility(&m).unwrap());
        let shifted = Covering::new(
            u.sets().iter().map(|set| set.iter().map(|&x| (x + 1).min(11)).collect()).collect(),
            12,
        )
        .unwrap();
        let r = check_m_equivalent(&u, &shifted, &Weight2D::constant_one(12), &s).unwrap();
        assert_eq!(r.c_prime, 1.0);
        assert!(r.equivalent);
        let short = Covering::singletons(3);
        assert!(check_m_equivalent(&u, &short, &m, &s).is_err());
    }

    #[test]
    fn m_equivalence_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let weights: Vec<f64> = (0..20).map(|_| rng.random_range(0.5..2.0)).collect();
        let s = QuadratureSpace::new((0..20).map(|k| vec![k as f64]).collect(), weights).unwrap();
        let w: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0f64..1.0).exp()).collect();
        let m = Weight2D::from_weight(&w, 0).unwrap();
        let u = uniform_covering(&s, 4.0, 1.0).unwrap();
        let v = Covering::new(
            u.sets()
                .iter()
                .map(|set| set.iter().map(|&x| (x + rng.random_range(0..3)).min(19)).collect())
                .collect(),
            20,
        )
        .unwrap();
        let r = check_m_equivalent(&u, &v, &m, &s).unwrap();
        let (mut c1, mut c2, mut cp) = (f64::INFINITY, 0.0f64, 0.0f64);
        for i in 0..u.len() {
            let mu: f64 = u.set(i).iter().map(|&x| s.weight(x)).sum();
            let mv: f64 = v.set(i).iter().map(|&x| s.weight(x)).sum();
            c1 = c1.min(mv / mu);
            c2 = c2.max(mv / mu);
            for &x in u.set(i) {
                for &y in v.set(i) {
                    cp = cp.max(m.get(x, y));
                }
            }
        }
        assert_eq!((r.c1, r.c2, r.c_prime), (c1, c2, cp));
        let l = equivalence_kernel(&u, &v, &s).unwrap();
        for x in 0..20 {
            for y in 0..20 {
                let mut direct = 0.0;
                for j in 0..u.len() {
                    if u.set(j).contains(&x) && v.set(j).contains(&y) {
                        direct += 1.0 / v.set(j).iter().map(|&z| s.weight(z)).sum::<f64>();
                    }
                }
                assert!((l.get(x, y).re - direct).abs() <= 1e-14 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn equivalence_kernel_special_cases() {
        let s = QuadratureSpace::new((0..6).map(|k| vec![k as f64]).collect(), vec![0.5, 1.0, 2.0, 1.0, 0.5, 1.5])
            .unwrap();
        let part = Covering::new(vec![vec![0, 1], vec![2, 3, 4], vec![5]], 6).unwrap();
        let l = equivalence_kernel(&part, &part, &s).unwrap();
        for j in 0..3 {
            let chi = crate::quadrature::GridFunction::indicator(6, part.set(j));
            let out = l.apply(&s, &chi).unwrap();
            for x in 0..6 {
                assert!((out[x] - chi[x]).norm() < 1e-14);
            }
        }
        let single = Covering::singletons(6);
        let l = equivalence_kernel(&single, &single, &s).unwrap();
        assert_eq!(l, Kernel::quadrature_identity(&s));
        let _ = Complex64::new(0.0, 0.0);
    }

    #[test]
    fn sampled_permutations_are_admissible() {
        let s = line(30);
        let cov = uniform_covering(&s, 4.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let perms = sample_admissible_permutations(&cov, 20, &mut rng);
        assert_eq!(perms.len(), 21);
        assert!(perms.iter().all(|p| is_admissible_permutation(&cov, p)));
        assert!(perms.iter().skip(1).any(|p| p.iter().enumerate().any(|(i, &v)| i != v)));
    }
}
