//! Exact optimal transport on finite metric spaces: Wasserstein distances,
//! Ollivier curvature, sectional-curvature certificates and Lipschitz constants.
//!
//! Curvature is computed from Dirac pairs only. For a pair set `S` that
//! generates the metric, `κ = 1 − max_{(x,y)∈S} W(P(x,·), P(y,·)) / d(x,y)`;
//! convexity of `W` and the gluing of couplings along geodesics make this equal
//! to the curvature over all pairs of measures.

mod maxflow;
mod simplex;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::{ensure_same_space, ProbabilityVector, StateSpace, StochasticMatrix};
use crate::error::{Error, Result};
use crate::metric::{verify_generating, GeneratingSet, MetricSpace, METRIC_TOL};

use maxflow::FlowNetwork;

/// Marginal tolerance for couplings.
pub const COUPLING_TOL: f64 = 1e-10;
/// Max-flow value must reach `1 − SECTIONAL_FLOW_TOL`.
pub const SECTIONAL_FLOW_TOL: f64 = 1e-10;

/// Masses below this are dropped from transport supports.
const SUPPORT_EPS: f64 = 0.0;

/// A joint law on `𝒳 × 𝒳` with prescribed marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    joint: DMatrix<f64>,
    left: ProbabilityVector,
    right: ProbabilityVector,
}

impl Coupling {
    pub fn new(joint: DMatrix<f64>, left: ProbabilityVector, right: ProbabilityVector) -> Result<Self> {
        ensure_same_space(left.space(), right.space())?;
        let n = left.len();
        if joint.nrows() != n || joint.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: joint.nrows(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = joint[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::BadEntry { row: i, col: j, value: v });
                }
            }
        }
        for i in 0..n {
            let r = joint.row(i).sum();
            if (r - left.get(i)).abs() > COUPLING_TOL {
                return Err(Error::BadRowSum {
                    row: i,
                    sum: r,
                    expected: left.get(i),
                });
            }
            let c = joint.column(i).sum();
            if (c - right.get(i)).abs() > COUPLING_TOL {
                return Err(Error::BadRowSum {
                    row: i,
                    sum: c,
                    expected: right.get(i),
                });
            }
        }
        Ok(Coupling { joint, left, right })
    }

    pub fn joint(&self) -> &DMatrix<f64> {
        &self.joint
    }

    pub fn left(&self) -> &ProbabilityVector {
        &self.left
    }

    pub fn right(&self) -> &ProbabilityVector {
        &self.right
    }

    pub fn space(&self) -> &StateSpace {
        self.left.space()
    }

    /// `E[d(X, Y)]`.
    pub fn expected_distance(&self, d: &MetricSpace) -> f64 {
        self.joint.component_mul(d.matrix()).sum()
    }

    /// Largest `d(u, v)` over cells with positive mass.
    pub fn max_support_distance(&self, d: &MetricSpace) -> f64 {
        let n = self.joint.nrows();
        let mut m: f64 = 0.0;
        for u in 0..n {
            for v in 0..n {
                if self.joint[(u, v)] > 0.0 {
                    m = m.max(d.dist(u, v));
                }
            }
        }
        m
    }
}

/// An optimal plan together with the transportation LP duals.
#[derive(Clone, Debug)]
pub struct WassersteinSolution {
    pub value: f64,
    pub plan: Coupling,
    /// Potential `u(x)` on source states (zero off the support of `μ`).
    pub source_potential: Vec<f64>,
    /// Potential `v(y)` on target states (zero off the support of `ν`).
    pub target_potential: Vec<f64>,
    /// Smallest reduced cost `d(x,y) − u(x) − v(y)` over the supports.
    pub min_reduced_cost: f64,
}

impl WassersteinSolution {
    /// `Σ μ u + Σ ν v`; equals `value` at optimality.
    pub fn dual_value(&self) -> f64 {
        let a: f64 = self.plan.left().weights().iter().zip(&self.source_potential).map(|(m, u)| m * u).sum();
        let b: f64 = self.plan.right().weights().iter().zip(&self.target_potential).map(|(m, v)| m * v).sum();
        a + b
    }
}

fn support(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > SUPPORT_EPS).collect()
}

struct RawPlan {
    value: f64,
    src: Vec<usize>,
    dst: Vec<usize>,
    sol: simplex::TransportSolution,
}

fn solve_raw(mu: &[f64], nu: &[f64], d: &MetricSpace) -> Result<RawPlan> {
    let src = support(mu);
    let dst = support(nu);
    if src.is_empty() || dst.is_empty() {
        return Err(Error::NotProbability("measure has empty support".into()));
    }
    let supply: Vec<f64> = src.iter().map(|&i| mu[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| nu[j]).collect();
    let cost = |i: usize, j: usize| d.dist(src[i], dst[j]);
    let sol = simplex::solve(&supply, &demand, &cost)?;
    Ok(RawPlan {
        value: sol.cost,
        src,
        dst,
        sol,
    })
}

/// `W(μ, ν)` as a plain number, skipping plan materialization.
pub fn wasserstein_value(mu: &[f64], nu: &[f64], d: &MetricSpace) -> Result<f64> {
    let n = d.size();
    if mu.len() != n || nu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.len().max(nu.len()),
        });
    }
    Ok(solve_raw(mu, nu, d)?.value)
}

/// Minimal expected distance over couplings of `μ` and `ν`, with an optimal plan.
///
/// The plan is whichever vertex the simplex terminates at; optimal plans need
/// not be unique.
pub fn wasserstein(mu: &ProbabilityVector, nu: &ProbabilityVector, d: &MetricSpace) -> Result<WassersteinSolution> {
    ensure_same_space(mu.space(), d.space())?;
    ensure_same_space(nu.space(), d.space())?;
    let raw = solve_raw(mu.weights(), nu.weights(), d)?;
    let n = d.size();
    let mut joint = DMatrix::zeros(n, n);
    for &(i, j, f) in &raw.sol.basis {
        joint[(raw.src[i], raw.dst[j])] += f;
    }
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    for (k, &i) in raw.src.iter().enumerate() {
        u[i] = raw.sol.row_potential[k];
    }
    for (k, &j) in raw.dst.iter().enumerate() {
        v[j] = raw.sol.col_potential[k];
    }
    let plan = Coupling::new(joint, mu.clone(), nu.clone())?;
    Ok(WassersteinSolution {
        value: raw.value,
        plan,
        source_potential: u,
        target_potential: v,
        min_reduced_cost: raw.sol.min_reduced_cost,
    })
}

/// Contraction factor `W(P(x,·), P(y,·)) / d(x, y)` of one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairContraction {
    pub x: usize,
    pub y: usize,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureReport {
    /// `1 − max factor`; may be negative.
    pub kappa: f64,
    pub per_pair: Vec<PairContraction>,
    pub generating_set: GeneratingSet,
}

impl CurvatureReport {
    /// The pair attaining the largest contraction factor.
    pub fn worst_pair(&self) -> Option<PairContraction> {
        self.per_pair
            .iter()
            .copied()
            .max_by(|a, b| a.factor.total_cmp(&b.factor))
    }
}

fn kernel_rows(p: &StochasticMatrix) -> Vec<Vec<f64>> {
    (0..p.size()).map(|x| p.entries().row(x).iter().copied().collect()).collect()
}

/// Ollivier curvature of `P` with respect to `d`, evaluated on a generating set.
pub fn ollivier_curvature(p: &StochasticMatrix, d: &MetricSpace, s: &GeneratingSet) -> Result<CurvatureReport> {
    ensure_same_space(p.space(), d.space())?;
    if s.is_empty() {
        return Err(Error::EmptyGeneratingSet);
    }
    if !verify_generating(d, s) {
        return Err(Error::NotGenerating);
    }
    let rows = kernel_rows(p);
    let pairs = s.deduplicated();
    let per_pair: Vec<PairContraction> = pairs
        .pairs()
        .par_iter()
        .map(|&(x, y)| {
            let w = solve_raw(&rows[x], &rows[y], d)?.value;
            Ok(PairContraction {
                x,
                y,
                factor: w / d.dist(x, y),
            })
        })
        .collect::<Result<_>>()?;
    let max = per_pair.iter().map(|c| c.factor).fold(f64::NEG_INFINITY, f64::max);
    Ok(CurvatureReport {
        kappa: 1.0 - max,
        per_pair,
        generating_set: pairs,
    })
}

/// Curvature over the trivial generating set `𝒳²`.
pub fn ollivier_curvature_all_pairs(p: &StochasticMatrix, d: &MetricSpace) -> Result<CurvatureReport> {
    ollivier_curvature(p, d, &d.all_pairs())
}

/// Outcome of the non-negative sectional curvature check.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionalCertificate {
    pub holds: bool,
    /// Distance-non-increasing couplings of `P⋆(x,·)`, `P⋆(y,·)` for feasible pairs.
    pub witnesses: BTreeMap<(usize, usize), Coupling>,
    /// Pairs for which no such coupling exists.
    pub failing: Vec<(usize, usize)>,
}

/// Max-flow over the cells `{(u, v) : d(u, v) ≤ bound}`; returns the flow value and the joint.
fn restricted_flow(a: &[f64], b: &[f64], d: &MetricSpace, bound: f64) -> (f64, DMatrix<f64>) {
    let n = a.len();
    let src = support(a);
    let dst = support(b);
    let (s, t) = (0, 1);
    let node_u = |k: usize| 2 + k;
    let node_v = |k: usize| 2 + src.len() + k;
    let mut g = FlowNetwork::new(2 + src.len() + dst.len());
    for (k, &u) in src.iter().enumerate() {
        g.add_edge(s, node_u(k), a[u]);
    }
    for (k, &v) in dst.iter().enumerate() {
        g.add_edge(node_v(k), t, b[v]);
    }
    let limit = bound + METRIC_TOL;
    let mut cells = Vec::new();
    for (ku, &u) in src.iter().enumerate() {
        for (kv, &v) in dst.iter().enumerate() {
            if d.dist(u, v) <= limit {
                let e = g.add_edge(node_u(ku), node_v(kv), f64::INFINITY);
                cells.push((u, v, e));
            }
        }
    }
    let value = g.max_flow(s, t);
    let mut joint = DMatrix::zeros(n, n);
    for (u, v, e) in cells {
        joint[(u, v)] = g.flow(e).max(0.0);
    }
    (value, joint)
}

fn pair_feasible(pstar_rows: &[Vec<f64>], d: &MetricSpace, x: usize, y: usize) -> (bool, DMatrix<f64>) {
    let (value, joint) = restricted_flow(&pstar_rows[x], &pstar_rows[y], d, d.dist(x, y));
    (value >= 1.0 - SECTIONAL_FLOW_TOL, joint)
}

/// Decides, for each pair of `S`, whether `P⋆(x,·)` and `P⋆(y,·)` admit a coupling
/// supported on `{d(u, v) ≤ d(x, y)}`. Feasibility on a generating set certifies it for all pairs.
pub fn sectional_feasible(pstar: &StochasticMatrix, d: &MetricSpace, s: &GeneratingSet) -> Result<SectionalCertificate> {
    ensure_same_space(pstar.space(), d.space())?;
    if !verify_generating(d, s) {
        return Err(Error::NotGenerating);
    }
    let rows = kernel_rows(pstar);
    let pairs = s.deduplicated();
    let results: Vec<((usize, usize), bool, DMatrix<f64>)> = pairs
        .pairs()
        .par_iter()
        .map(|&(x, y)| {
            let (ok, joint) = pair_feasible(&rows, d, x, y);
            ((x, y), ok, joint)
        })
        .collect();
    let mut witnesses = BTreeMap::new();
    let mut failing = Vec::new();
    for ((x, y), ok, joint) in results {
        if ok {
            let c = Coupling::new(joint, pstar.row(x), pstar.row(y))?;
            witnesses.insert((x, y), c);
        } else {
            failing.push((x, y));
        }
    }
    Ok(SectionalCertificate {
        holds: failing.is_empty(),
        witnesses,
        failing,
    })
}

/// Like [`sectional_feasible`] but only returns the verdict, stopping at the first failure.
pub fn sectional_holds(pstar: &StochasticMatrix, d: &MetricSpace, s: &GeneratingSet) -> Result<bool> {
    ensure_same_space(pstar.space(), d.space())?;
    if !verify_generating(d, s) {
        return Err(Error::NotGenerating);
    }
    let rows = kernel_rows(pstar);
    Ok(s
        .deduplicated()
        .pairs()
        .par_iter()
        .all(|&(x, y)| pair_feasible(&rows, d, x, y).0))
}

/// `Lip(f) = max_{x≠y} |f(x) − f(y)| / d(x, y)`.
pub fn lipschitz(f: &[f64], d: &MetricSpace) -> f64 {
    let n = d.size();
    let mut best: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            best = best.max((f[x] - f[y]).abs() / d.dist(x, y));
        }
    }
    best
}
