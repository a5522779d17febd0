//! Glauber dynamics: pick a coordinate uniformly and resample it from its
//! conditional law under the target.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{ProbabilityVector, StateSpace, StochasticMatrix};
use crate::error::{Error, Result};
use crate::metric::{GeneratingSet, MetricSpace};

use super::{check_cap, decode, DiscreteModel};

/// A pairwise interaction `ψ_ij` with `psi[σ][τ] = ψ_ij(σ, τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub psi: Vec<Vec<f64>>,
}

/// `π(x) ∝ exp Σ_{i<j} ψ_ij(x_i, x_j)` on `𝕊ⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystem {
    pub alphabet: Vec<String>,
    pub n: usize,
    pub interactions: Vec<Interaction>,
}

impl SpinSystem {
    /// Ising model on `{−1, +1}` with `ψ_ij(σ,τ) = βστ` on each edge.
    pub fn ising(n: usize, edges: &[(usize, usize)], beta: f64) -> Self {
        let psi = vec![vec![beta, -beta], vec![-beta, beta]];
        SpinSystem {
            alphabet: vec!["-1".into(), "1".into()],
            n,
            interactions: edges
                .iter()
                .map(|&(i, j)| Interaction {
                    i,
                    j,
                    psi: psi.clone(),
                })
                .collect(),
        }
    }

    /// Dense table `psi[i][j][σ][τ]` with the convention `ψ_ji(τ,σ) = ψ_ij(σ,τ)`.
    fn table(&self) -> Result<Vec<Vec<Option<Vec<Vec<f64>>>>>> {
        let (n, q) = (self.n, self.alphabet.len());
        if n == 0 || q == 0 {
            return Err(Error::EmptySpace);
        }
        let mut t: Vec<Vec<Option<Vec<Vec<f64>>>>> = vec![vec![None; n]; n];
        for int in &self.interactions {
            let (i, j) = (int.i, int.j);
            if i >= n || j >= n {
                return Err(Error::InvalidPair(i, j));
            }
            if int.psi.len() != q || int.psi.iter().any(|r| r.len() != q) {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: int.psi.len(),
                });
            }
            if int.psi.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::AsymmetricInteraction(format!("ψ_{i}{j} has non-finite entries")));
            }
            if i == j {
                if int.psi.iter().flatten().any(|&v| v != 0.0) {
                    return Err(Error::AsymmetricInteraction(format!("ψ_{i}{i} must vanish")));
                }
                continue;
            }
            let transposed: Vec<Vec<f64>> = (0..q).map(|a| (0..q).map(|b| int.psi[b][a]).collect()).collect();
            for (a, b, m) in [(i, j, int.psi.clone()), (j, i, transposed)] {
                match &t[a][b] {
                    Some(prev) if *prev != m => {
                        return Err(Error::AsymmetricInteraction(format!(
                            "ψ_{a}{b} conflicts with the transposed ψ_{b}{a}"
                        )))
                    }
                    _ => t[a][b] = Some(m),
                }
            }
        }
        Ok(t)
    }

    /// Unnormalized log-weight `Σ_{i<j} ψ_ij(x_i,x_j)`.
    fn log_weight(table: &[Vec<Option<Vec<Vec<f64>>>>], x: &[usize]) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                if let Some(psi) = &table[i][j] {
                    s += psi[x[i]][x[j]];
                }
            }
        }
        s
    }
}

/// The target law of a Glauber chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum GlauberTarget {
    /// Unnormalized weights on `𝕊ⁿ`, words indexed with the first site most significant.
    Explicit {
        alphabet: Vec<String>,
        n: usize,
        weights: Vec<f64>,
    },
    Spin(SpinSystem),
}

impl GlauberTarget {
    fn alphabet(&self) -> &[String] {
        match self {
            GlauberTarget::Explicit { alphabet, .. } => alphabet,
            GlauberTarget::Spin(s) => &s.alphabet,
        }
    }

    fn n(&self) -> usize {
        match self {
            GlauberTarget::Explicit { n, .. } => *n,
            GlauberTarget::Spin(s) => s.n,
        }
    }

    /// Normalized weights over all of `𝕊ⁿ`.
    fn full_weights(&self) -> Result<Vec<f64>> {
        let (q, n) = (self.alphabet().len(), self.n());
        if q == 0 || n == 0 {
            return Err(Error::EmptySpace);
        }
        let states = q.checked_pow(n as u32).unwrap_or(usize::MAX);
        check_cap(states)?;
        let w = match self {
            GlauberTarget::Explicit { weights, .. } => {
                if weights.len() != states {
                    return Err(Error::DimensionMismatch {
                        expected: states,
                        found: weights.len(),
                    });
                }
                if weights.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::NotProbability("weights must be finite and non-negative".into()));
                }
                weights.clone()
            }
            GlauberTarget::Spin(s) => {
                let table = s.table()?;
                let logs: Vec<f64> = (0..states)
                    .map(|k| SpinSystem::log_weight(&table, &decode(k, q, n)))
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                logs.iter().map(|l| (l - top).exp()).collect()
            }
        };
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotProbability("weights have zero total mass".into()));
        }
        Ok(w.into_iter().map(|v| v / total).collect())
    }
}

/// The target restricted to its support, with conditional laws.
struct Target {
    q: usize,
    n: usize,
    /// full-space weights
    full: Vec<f64>,
    /// support states as full-space indices, ascending
    support: Vec<usize>,
}

impl Target {
    fn new(target: &GlauberTarget) -> Result<Self> {
        let full = target.full_weights()?;
        let support = (0..full.len()).filter(|&k| full[k] > 0.0).collect();
        Ok(Target {
            q: target.alphabet().len(),
            n: target.n(),
            full,
            support,
        })
    }

    fn flip(&self, k: usize, i: usize, sigma: usize) -> usize {
        let stride = self.q.pow((self.n - 1 - i) as u32);
        let cur = (k / stride) % self.q;
        k - cur * stride + sigma * stride
    }

    /// `π_i(σ | x)` for a full-space index `x` in the support.
    fn conditional(&self, x: usize, i: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..self.q).map(|s| self.full[self.flip(x, i, s)]).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }
}

/// Single-coordinate Glauber kernel on `supp(π)`, with the combinatorial metric.
pub fn build_glauber(target: &GlauberTarget) -> Result<DiscreteModel> {
    let t = Target::new(target)?;
    let (q, n) = (t.q, t.n);
    let pos: HashMap<usize, usize> = t.support.iter().enumerate().map(|(a, &k)| (k, a)).collect();
    let m = t.support.len();
    let alphabet = target.alphabet();
    let labels = t.support.iter().map(|&k| {
        decode(k, q, n)
            .iter()
            .map(|&c| alphabet[c].as_str())
            .collect::<Vec<_>>()
            .join(",")
    });
    let space = StateSpace::new(labels)?;

    let mut p = DMatrix::zeros(m, m);
    let mut pairs = Vec::new();
    for (a, &x) in t.support.iter().enumerate() {
        for i in 0..n {
            let cond = t.conditional(x, i);
            for (sigma, &c) in cond.iter().enumerate() {
                let y = t.flip(x, i, sigma);
                if c > 0.0 {
                    let b = pos[&y];
                    p[(a, b)] += c / n as f64;
                    if a < b {
                        pairs.push((a, b));
                    }
                }
            }
        }
    }
    let kernel = StochasticMatrix::new(space.clone(), p)?;
    let dist = support_distances(&pairs, m).ok_or(Error::DisconnectedSupport)?;
    let metric = MetricSpace::from_trusted(space.clone(), dist);
    let generating_set = GeneratingSet::certified(pairs, &metric);
    let pi = ProbabilityVector::normalized(space, t.support.iter().map(|&k| t.full[k]).collect::<Vec<_>>())?;
    Ok(DiscreteModel {
        kernel,
        pi,
        metric,
        generating_set,
    })
}

/// BFS distances over unit edges; `None` if the graph is disconnected.
fn support_distances(pairs: &[(usize, usize)], m: usize) -> Option<DMatrix<f64>> {
    let mut adj = vec![Vec::new(); m];
    for &(a, b) in pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = DMatrix::from_element(m, m, f64::INFINITY);
    for src in 0..m {
        dist[(src, src)] = 0.0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[(src, v)].is_infinite() {
                    dist[(src, v)] = dist[(src, u)] + 1.0;
                    queue.push_back(v);
                }
            }
        }
    }
    dist.iter().all(|d| d.is_finite()).then_some(dist)
}

/// Outcome of the weak-dependency check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakDependency {
    pub holds: bool,
    /// `(1/n) min {1 − Σ_{j≠i} Σ_{σ≠x_j} |π_j(σ|y) − π_j(σ|x)|}`
    pub kappa: f64,
}

/// Checks `π_i(y_i|x) ≥ Σ_{j≠i} Σ_{σ≠x_j} (π_j(σ|y) − π_j(σ|x))₊` over all
/// support pairs differing exactly at `i`, and returns the associated `κ`.
pub fn glauber_weakdep(target: &GlauberTarget) -> Result<WeakDependency> {
    let t = Target::new(target)?;
    let (q, n) = (t.q, t.n);
    let mut holds = true;
    let mut worst = 1.0f64;
    for &x in &t.support {
        let xw = decode(x, q, n);
        let conds_x: Vec<Vec<f64>> = (0..n).map(|j| t.conditional(x, j)).collect();
        for i in 0..n {
            for sigma in 0..q {
                if sigma == xw[i] {
                    continue;
                }
                let y = t.flip(x, i, sigma);
                if t.full[y] <= 0.0 {
                    continue;
                }
                let mut pos_part = 0.0;
                let mut abs_part = 0.0;
                for j in (0..n).filter(|&j| j != i) {
                    let cy = t.conditional(y, j);
                    for s in (0..q).filter(|&s| s != xw[j]) {
                        let diff = cy[s] - conds_x[j][s];
                        pos_part += diff.max(0.0);
                        abs_part += diff.abs();
                    }
                }
                if conds_x[i][sigma] < pos_part {
                    holds = false;
                }
                worst = worst.min(1.0 - abs_part);
            }
        }
    }
    Ok(WeakDependency {
        holds,
        kappa: worst / n as f64,
    })
}

/// Influence matrix `J_ij = ½ max |ψ_ij(σ,τ) − ψ_ij(σ',τ)|` and
/// `‖J‖ = (|𝕊| − 1) max_i Σ_j J_ij`.
pub fn spin_influences(system: &SpinSystem) -> Result<(DMatrix<f64>, f64)> {
    let table = system.table()?;
    let (n, q) = (system.n, system.alphabet.len());
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if let Some(psi) = &table[a][b] {
                let mut best = 0.0f64;
                for tau in 0..q {
                    for s in 0..q {
                        for s2 in 0..q {
                            best = best.max((psi[s][tau] - psi[s2][tau]).abs());
                        }
                    }
                }
                j[(a, b)] = best / 2.0;
            }
        }
    }
    let norm = (q as f64 - 1.0) * (0..n).map(|a| j.row(a).sum()).fold(0.0, f64::max);
    Ok((j, norm))
}

/// The root of `ε = (1 + e^{2ε/q})^{−1}` in `(0, 1)`, by bisection.
pub fn solve_epsilon_q(q: u32) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    let g = |e: f64| e - 1.0 / (1.0 + (2.0 * e / q as f64).exp());
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
