//! Finite metric spaces and the pair sets that generate them by shortest paths.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chain::{StateSpace, StochasticMatrix};
use crate::error::{Error, Result};

/// Tolerance for symmetry, triangle inequality and shortest-path comparisons.
pub const METRIC_TOL: f64 = 1e-12;

fn scaled_tol(a: f64) -> f64 {
    METRIC_TOL * a.abs().max(1.0)
}

/// A distance matrix satisfying the metric axioms.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpace {
    space: StateSpace,
    dist: Arc<DMatrix<f64>>,
}

impl MetricSpace {
    pub fn new(space: StateSpace, dist: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if dist.nrows() != n || dist.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: dist.nrows().max(dist.ncols()),
            });
        }
        for x in 0..n {
            if dist[(x, x)] != 0.0 {
                return Err(Error::InvalidMetric(format!("d({x},{x}) = {}", dist[(x, x)])));
            }
            for y in 0..n {
                let d = dist[(x, y)];
                if !d.is_finite() {
                    return Err(Error::InvalidMetric(format!("d({x},{y}) is not finite")));
                }
                if x != y && d <= 0.0 {
                    return Err(Error::InvalidMetric(format!("d({x},{y}) = {d} is not positive")));
                }
                if (d - dist[(y, x)]).abs() > scaled_tol(d) {
                    return Err(Error::InvalidMetric(format!("d({x},{y}) ≠ d({y},{x})")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let via = dist[(x, z)] + dist[(z, y)];
                    if dist[(x, y)] > via + scaled_tol(via) {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for ({x},{y}) via {z}"
                        )));
                    }
                }
            }
        }
        Ok(MetricSpace::from_trusted(space, dist))
    }

    /// Skips validation for distances that are metrics by construction.
    pub(crate) fn from_trusted(space: StateSpace, dist: DMatrix<f64>) -> Self {
        MetricSpace {
            space,
            dist: Arc::new(dist),
        }
    }

    /// Builds the matrix from a distance function and validates it.
    pub fn from_fn(space: StateSpace, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = space.len();
        Self::new(space, DMatrix::from_fn(n, n, f))
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dist
    }

    /// All ordered pairs `x ≠ y`, i.e. the trivial generating set `𝒳²`.
    pub fn all_pairs(&self) -> GeneratingSet {
        let n = self.size();
        let pairs = (0..n)
            .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
            .collect();
        GeneratingSet::certified(pairs, self)
    }
}

/// Pairs of states whose shortest-path closure reproduces a metric.
///
/// Pairs are treated as undirected edges: `(x, y)` also connects `y` to `x`.
///
/// Sets produced together with their metric (closures, model builders) carry a
/// certificate tied to that metric instance, which lets curvature routines skip
/// re-verification.
#[derive(Clone, Debug)]
pub struct GeneratingSet {
    pairs: Vec<(usize, usize)>,
    certified_for: Option<Arc<DMatrix<f64>>>,
}

impl PartialEq for GeneratingSet {
    fn eq(&self, other: &Self) -> bool {
        self.pairs == other.pairs
    }
}

impl GeneratingSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(x, y)) = pairs.iter().find(|(x, y)| x == y) {
            return Err(Error::InvalidPair(x, y));
        }
        Ok(GeneratingSet {
            pairs,
            certified_for: None,
        })
    }

    /// Pairs known to generate `d`.
    pub(crate) fn certified(pairs: Vec<(usize, usize)>, d: &MetricSpace) -> Self {
        GeneratingSet {
            pairs,
            certified_for: Some(d.dist.clone()),
        }
    }

    /// Whether the set was produced together with this metric instance.
    pub fn is_certified_for(&self, d: &MetricSpace) -> bool {
        self.certified_for.as_ref().is_some_and(|m| Arc::ptr_eq(m, &d.dist))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keeps one representative `(min, max)` per unordered pair.
    pub fn deduplicated(&self) -> GeneratingSet {
        let set: BTreeSet<(usize, usize)> =
            self.pairs.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect();
        GeneratingSet {
            pairs: set.into_iter().collect(),
            certified_for: self.certified_for.clone(),
        }
    }
}

fn floyd_warshall(d: &mut DMatrix<f64>) {
    let n = d.nrows();
    for k in 0..n {
        for i in 0..n {
            let dik = d[(i, k)];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[(k, j)];
                if via < d[(i, j)] {
                    d[(i, j)] = via;
                }
            }
        }
    }
}

/// Shortest-path distance in the undirected support graph of `P`
/// (`x ~ y` iff `P(x,y) > 0` or `P(y,x) > 0`), unit edge lengths.
pub fn combinatorial_distance(p: &StochasticMatrix) -> Result<MetricSpace> {
    let n = p.size();
    let mut dist = DMatrix::from_element(n, n, f64::INFINITY);
    for src in 0..n {
        dist[(src, src)] = 0.0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if v != u && (p.get(u, v) > 0.0 || p.get(v, u) > 0.0) && dist[(src, v)].is_infinite() {
                    dist[(src, v)] = dist[(src, u)] + 1.0;
                    queue.push_back(v);
                }
            }
        }
    }
    if dist.iter().any(|d| d.is_infinite()) {
        return Err(Error::NotConnected);
    }
    Ok(MetricSpace::from_trusted(p.space().clone(), dist))
}

/// All-pairs shortest paths over weighted pairs; the input pairs are returned as the generating set.
pub fn closure_from_pairs(
    space: StateSpace,
    weighted_pairs: &[(usize, usize, f64)],
) -> Result<(MetricSpace, GeneratingSet)> {
    let n = space.len();
    let mut d = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        d[(i, i)] = 0.0;
    }
    let mut pairs = Vec::with_capacity(weighted_pairs.len());
    for &(x, y, w) in weighted_pairs {
        if x >= n || y >= n || x == y {
            return Err(Error::InvalidPair(x, y));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonpositiveWeight(w));
        }
        if w < d[(x, y)] {
            d[(x, y)] = w;
            d[(y, x)] = w;
        }
        pairs.push((x, y));
    }
    floyd_warshall(&mut d);
    if d.iter().any(|v| v.is_infinite()) {
        return Err(Error::NotConnected);
    }
    // enforce exact symmetry against rounding in path sums
    for x in 0..n {
        for y in x + 1..n {
            let m = d[(x, y)].min(d[(y, x)]);
            d[(x, y)] = m;
            d[(y, x)] = m;
        }
    }
    let metric = MetricSpace::new(space, d)?;
    let set = GeneratingSet::certified(pairs, &metric);
    Ok((metric, set))
}

/// Whether shortest paths over the edges `S`, weighted by `d`, reproduce `d`.
pub fn verify_generating(d: &MetricSpace, s: &GeneratingSet) -> bool {
    if s.is_certified_for(d) {
        return true;
    }
    let n = d.size();
    let mut sp = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        sp[(i, i)] = 0.0;
    }
    for &(x, y) in s.pairs() {
        if x >= n || y >= n {
            return false;
        }
        sp[(x, y)] = d.dist(x, y);
        sp[(y, x)] = d.dist(x, y);
    }
    floyd_warshall(&mut sp);
    (0..n).all(|x| {
        (0..n).all(|y| {
            let target = d.dist(x, y);
            (sp[(x, y)] - target).abs() <= scaled_tol(target)
        })
    })
}

/// `d(x, y) = 1_{x ≠ y}`; its Wasserstein distance is total variation.
pub fn trivial_metric(space: StateSpace) -> MetricSpace {
    let n = space.len();
    let dist = DMatrix::from_fn(n, n, |x, y| if x == y { 0.0 } else { 1.0 });
    MetricSpace::from_trusted(space, dist)
}

/// Number of coordinates at which two equal-length words differ.
pub fn hamming<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).filter(|(u, v)| u != v).count()
}

/// Minimal number of transpositions turning permutation `a` into `b`:
/// `n − #cycles(a⁻¹ b)`.
pub fn transposition_distance(a: &[usize], b: &[usize]) -> usize {
    let n = a.len();
    let mut inv_a = vec![0; n];
    for (i, &v) in a.iter().enumerate() {
        inv_a[v] = i;
    }
    // rel = a⁻¹ ∘ b, as a map on sites
    let rel: Vec<usize> = b.iter().map(|&v| inv_a[v]).collect();
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for start in 0..n {
        if !seen[start] {
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = rel[i];
            }
        }
    }
    n - cycles
}

/// `½ Σ |x_i − y_i|` on particle configurations.
pub fn half_l1(a: &[usize], b: &[usize]) -> f64 {
    let s: usize = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum();
    s as f64 / 2.0
}
