//! Interchange process on `𝔖ₙ` driven by a weighted hypergraph: when the clock
//! of block `A` rings, the particles inside `A` are shuffled uniformly.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundCurve, BoundKind};
use crate::chain::{Generator, ProbabilityVector, StateSpace};
use crate::entropy::check_times;
use crate::error::{Error, Result};
use crate::metric::{transposition_distance, GeneratingSet, MetricSpace};

use super::{check_cap, killed_survival, ContinuousModel};

/// A block `A ⊆ [n]` (0-based sites) with its ringing rate `c(A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub sites: Vec<usize>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterchangeSpec {
    pub n: usize,
    pub blocks: Vec<Block>,
}

impl InterchangeSpec {
    /// Every pair `{i, j}` rings at `rate`.
    pub fn random_transpositions(n: usize, rate: f64) -> Self {
        let mut blocks = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                blocks.push(Block {
                    sites: vec![i, j],
                    rate,
                });
            }
        }
        InterchangeSpec { n, blocks }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptySpace);
        }
        for b in &self.blocks {
            if !(b.rate >= 0.0) || !b.rate.is_finite() {
                return Err(Error::BadRates(format!("block rate {} must be non-negative", b.rate)));
            }
            let mut s = b.sites.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != b.sites.len() || s.iter().any(|&i| i >= self.n) {
                return Err(Error::BadRates(format!("block {:?} is not a subset of the sites", b.sites)));
            }
        }
        Ok(())
    }
}

/// `ĉ(i,j) = Σ_{A ⊇ {i,j}} c(A)/|A|`, zero on the diagonal.
pub fn single_particle_conductances(spec: &InterchangeSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n;
    let mut c = DMatrix::zeros(n, n);
    for b in &spec.blocks {
        let w = b.rate / b.sites.len() as f64;
        for &i in &b.sites {
            for &j in &b.sites {
                if i != j {
                    c[(i, j)] += w;
                }
            }
        }
    }
    Ok(c)
}

fn conductances_connected(c: &DMatrix<f64>) -> bool {
    let n = c.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if c[(u, v)] > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// All permutations of `items` in lexicographic order of positions.
pub(crate) fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Permutation label with 1-based values, e.g. `"2,1,3"`.
pub(crate) fn perm_label(p: &[usize]) -> String {
    p.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(",")
}

pub fn build_interchange(spec: &InterchangeSpec) -> Result<ContinuousModel> {
    spec.validate()?;
    let n = spec.n;
    let states = (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    check_cap(states)?;
    if !conductances_connected(&single_particle_conductances(spec)?) {
        return Err(Error::NotConnected);
    }
    let perms = permutations(&(0..n).collect::<Vec<_>>());
    let index: HashMap<&[usize], usize> = perms.iter().enumerate().map(|(k, p)| (p.as_slice(), k)).collect();
    let space = StateSpace::new(perms.iter().map(|p| perm_label(p)))?;

    let mut rates = DMatrix::zeros(states, states);
    for b in spec.blocks.iter().filter(|b| b.rate > 0.0 && b.sites.len() > 1) {
        let shuffles = permutations(&b.sites);
        let w = b.rate / shuffles.len() as f64;
        for (x, p) in perms.iter().enumerate() {
            for sigma in &shuffles {
                let mut y = p.clone();
                for (pos, &src) in b.sites.iter().zip(sigma) {
                    y[*pos] = p[src];
                }
                let target = index[y.as_slice()];
                if target != x {
                    rates[(x, target)] += w;
                }
            }
        }
    }
    let generator = Generator::from_off_diagonal(space.clone(), rates)?;
    let pi = ProbabilityVector::uniform(space.clone());
    let metric = MetricSpace::from_trusted(
        space,
        DMatrix::from_fn(states, states, |x, y| transposition_distance(&perms[x], &perms[y]) as f64),
    );
    let mut pairs = Vec::new();
    for (x, p) in perms.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let mut y = p.clone();
                y.swap(i, j);
                let target = index[y.as_slice()];
                if x < target {
                    pairs.push((x, target));
                }
            }
        }
    }
    let generating_set = GeneratingSet::certified(pairs, &metric);
    Ok(ContinuousModel {
        generator,
        pi,
        metric,
        generating_set,
    })
}

/// `max_{i≠j} P_{i,j}(T > t)` for two independent walks on `[n]` with
/// conductances `ĉ`, `T` their meeting time.
pub fn interchange_meeting_tail(spec: &InterchangeSpec, times: &[f64]) -> Result<BoundCurve> {
    check_times(times)?;
    let c = single_particle_conductances(spec)?;
    let n = spec.n;
    if n < 2 {
        return BoundCurve::new(times.to_vec(), vec![0.0; times.len()], BoundKind::ModelSpecific);
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let idx: HashMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let out_rate: Vec<f64> = (0..n).map(|i| c.row(i).sum()).collect();
    let mut q = DMatrix::zeros(pairs.len(), pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        q[(k, k)] = -out_rate[i] - out_rate[j];
        for v in 0..n {
            if v != i && v != j {
                q[(k, idx[&(v, j)])] += c[(i, v)];
                q[(k, idx[&(i, v)])] += c[(j, v)];
            }
        }
    }
    let values = times
        .iter()
        .map(|&t| killed_survival(&q, t).into_iter().fold(0.0, f64::max))
        .collect();
    BoundCurve::new(times.to_vec(), values, BoundKind::ModelSpecific)
}
