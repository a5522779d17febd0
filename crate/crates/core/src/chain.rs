//! Stochastic matrices, generators, stationary laws, adjoints and semigroups.
//!
//! Matrices are dense (`nalgebra::DMatrix`), rows index the current state and
//! columns the next state. Measures act on the left (`μP`), functions on the
//! right (`Pf`).

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row sums within this distance of one are accepted as they are.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Row sums off by less than this are renormalized; larger deviations are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;
/// Generator rows must sum to zero within this tolerance.
pub const GENERATOR_ROW_TOL: f64 = 1e-10;
/// Residual allowed in `πP = π` checks.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Neglected Poisson tail mass in uniformization.
pub const UNIFORMIZATION_TAIL: f64 = 1e-13;

struct SpaceInner {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// A finite, labeled state space. Cheap to clone.
#[derive(Clone)]
pub struct StateSpace {
    inner: Arc<SpaceInner>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(StateSpace {
            inner: Arc::new(SpaceInner { labels, index }),
        })
    }

    /// States labeled `0..n`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.inner.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.inner.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.inner.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.inner
            .index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    fn ensure_size(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.labels == other.inner.labels
    }
}

impl fmt::Debug for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("StateSpace").field(&self.inner.labels).finish()
    }
}

pub(crate) fn ensure_same_space(a: &StateSpace, b: &StateSpace) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// A probability measure on a state space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    space: StateSpace,
    weights: DVector<f64>,
}

impl ProbabilityVector {
    pub fn new(space: StateSpace, weights: impl Into<Vec<f64>>) -> Result<Self> {
        let weights: Vec<f64> = weights.into();
        space.ensure_size(weights.len())?;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NotProbability(format!("entry {i} is {w}")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotProbability(format!("weights sum to {sum}")));
        }
        Ok(ProbabilityVector {
            space,
            weights: DVector::from_vec(weights),
        })
    }

    /// Scales non-negative weights with positive total to unit mass.
    pub fn normalized(space: StateSpace, weights: impl Into<Vec<f64>>) -> Result<Self> {
        let mut weights: Vec<f64> = weights.into();
        space.ensure_size(weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NotProbability("negative or non-finite weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::NotProbability("weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(ProbabilityVector {
            space,
            weights: DVector::from_vec(weights),
        })
    }

    pub fn dirac(space: StateSpace, state: usize) -> Result<Self> {
        if state >= space.len() {
            return Err(Error::InvalidArgument(format!("state {state} out of range")));
        }
        let mut w = vec![0.0; space.len()];
        w[state] = 1.0;
        Ok(ProbabilityVector {
            space,
            weights: DVector::from_vec(w),
        })
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.len();
        ProbabilityVector {
            space,
            weights: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Total-variation distance `Σ (μ − ν)₊`.
    pub fn total_variation(&self, other: &ProbabilityVector) -> f64 {
        self.weights
            .iter()
            .zip(other.weights.iter())
            .map(|(a, b)| (a - b).max(0.0))
            .sum()
    }

    /// Builds a vector from values known to be a probability up to rounding.
    pub(crate) fn from_trusted(space: StateSpace, weights: DVector<f64>) -> Self {
        let mut weights = weights.map(|w| w.max(0.0));
        let sum = weights.sum();
        if sum > 0.0 {
            weights /= sum;
        }
        ProbabilityVector { space, weights }
    }
}

fn validate_entries(m: &DMatrix<f64>, allow_negative_diagonal: bool) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            let ok = v.is_finite() && (v >= 0.0 || (allow_negative_diagonal && i == j));
            if !ok {
                return Err(Error::BadEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Strong connectivity of the directed graph `i → j` iff `adj(i, j)`.
pub(crate) fn strongly_connected(n: usize, adj: impl Fn(usize, usize) -> bool) -> bool {
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let edge = if forward { adj(u, v) } else { adj(v, u) };
                if edge && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    };
    n > 0 && reach(true) && reach(false)
}

/// Row-stochastic transition kernel on a labeled space.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    space: StateSpace,
    entries: DMatrix<f64>,
    irreducible: bool,
}

impl StochasticMatrix {
    /// Validates and, for rows off by less than [`RENORMALIZE_TOL`], renormalizes.
    pub fn new(space: StateSpace, entries: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        validate_entries(&entries, false)?;
        let mut entries = entries;
        for i in 0..n {
            let sum: f64 = entries.row(i).sum();
            let dev = (sum - 1.0).abs();
            if dev >= RENORMALIZE_TOL {
                return Err(Error::BadRowSum {
                    row: i,
                    sum,
                    expected: 1.0,
                });
            }
            if dev > ROW_SUM_TOL {
                entries.row_mut(i).scale_mut(1.0 / sum);
            }
        }
        Ok(Self::from_valid(space, entries))
    }

    pub fn from_rows(space: StateSpace, rows: &[Vec<f64>]) -> Result<Self> {
        let n = space.len();
        space.ensure_size(rows.len())?;
        for r in rows {
            space.ensure_size(r.len())?;
        }
        Self::new(space, DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Rows are known to be stochastic up to accumulated rounding; clip and rescale.
    pub(crate) fn from_trusted(space: StateSpace, mut entries: DMatrix<f64>) -> Self {
        for i in 0..entries.nrows() {
            let mut row = entries.row_mut(i);
            row.apply(|v| *v = v.max(0.0));
            let sum = row.sum();
            if sum > 0.0 {
                row.scale_mut(1.0 / sum);
            }
        }
        Self::from_valid(space, entries)
    }

    fn from_valid(space: StateSpace, entries: DMatrix<f64>) -> Self {
        let n = space.len();
        let irreducible = strongly_connected(n, |i, j| entries[(i, j)] > 0.0);
        StochasticMatrix {
            space,
            entries,
            irreducible,
        }
    }

    pub fn identity(space: StateSpace) -> Self {
        let n = space.len();
        Self::from_valid(space, DMatrix::identity(n, n))
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    /// Row `x` as the measure `P(x, ·)`.
    pub fn row(&self, x: usize) -> ProbabilityVector {
        ProbabilityVector::from_trusted(self.space.clone(), self.entries.row(x).transpose())
    }

    /// `μP`.
    pub fn push_forward(&self, mu: &ProbabilityVector) -> Result<ProbabilityVector> {
        ensure_same_space(&self.space, mu.space())?;
        let out = self.entries.tr_mul(mu.as_dvector());
        Ok(ProbabilityVector::from_trusted(self.space.clone(), out))
    }

    /// `Pf`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.space.ensure_size(f.len())?;
        let v = &self.entries * DVector::from_column_slice(f);
        Ok(v.as_slice().to_vec())
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        ensure_same_space(&self.space, other.space())?;
        Ok(Self::from_trusted(
            self.space.clone(),
            &self.entries * &other.entries,
        ))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

/// Continuous-time rate matrix with non-negative off-diagonal entries and zero row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    space: StateSpace,
    rates: DMatrix<f64>,
}

impl Generator {
    pub fn new(space: StateSpace, rates: DMatrix<f64>) -> Result<Self> {
        let n = space.len();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rates.nrows().max(rates.ncols()),
            });
        }
        validate_entries(&rates, true)?;
        for i in 0..n {
            let sum: f64 = rates.row(i).sum();
            if sum.abs() > GENERATOR_ROW_TOL {
                return Err(Error::BadRowSum {
                    row: i,
                    sum,
                    expected: 0.0,
                });
            }
        }
        Ok(Generator { space, rates })
    }

    /// Builds a generator from off-diagonal rates, filling the diagonal.
    pub fn from_off_diagonal(space: StateSpace, mut rates: DMatrix<f64>) -> Result<Self> {
        for i in 0..rates.nrows().min(rates.ncols()) {
            rates[(i, i)] = 0.0;
            let out: f64 = rates.row(i).sum();
            rates[(i, i)] = -out;
        }
        Self::new(space, rates)
    }

    /// `L = P − I`.
    pub fn from_kernel(p: &StochasticMatrix) -> Self {
        let n = p.size();
        let mut rates = p.entries().clone() - DMatrix::identity(n, n);
        for i in 0..n {
            rates[(i, i)] = 0.0;
            let out: f64 = rates.row(i).sum();
            rates[(i, i)] = -out;
        }
        Generator {
            space: p.space().clone(),
            rates,
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    pub fn is_irreducible(&self) -> bool {
        strongly_connected(self.size(), |i, j| i != j && self.rates[(i, j)] > 0.0)
            || self.size() == 1
    }

    /// Largest exit rate `max_x |L(x, x)|`.
    pub fn uniformization_rate(&self) -> f64 {
        (0..self.size())
            .map(|i| -self.rates[(i, i)])
            .fold(0.0, f64::max)
    }

    /// The kernel `I + L/Λ` with `Λ` the uniformization rate (identity when `L = 0`).
    pub fn uniformized_kernel(&self) -> StochasticMatrix {
        let n = self.size();
        let lambda = self.uniformization_rate();
        if lambda == 0.0 {
            return StochasticMatrix::identity(self.space.clone());
        }
        let k = DMatrix::identity(n, n) + &self.rates / lambda;
        StochasticMatrix::from_trusted(self.space.clone(), k)
    }

    pub fn max_abs_diff(&self, other: &Generator) -> f64 {
        (&self.rates - &other.rates).amax()
    }
}

/// Solves `Aᵀπ = 0`, `Σπ = 1` where `A` is `P − I` or `L`.
fn solve_stationary(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let mut sys = a.transpose();
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = sys.clone().lu();
    let mut pi = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular stationary system".into()))?;
    // one step of iterative refinement
    let resid = &rhs - &sys * &pi;
    if let Some(corr) = lu.solve(&resid) {
        pi += corr;
    }
    if pi.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Numerical(
            "stationary solve produced a non-positive entry".into(),
        ));
    }
    let s = pi.sum();
    Ok(pi / s)
}

/// The unique invariant law of an irreducible kernel.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<ProbabilityVector> {
    if !p.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let n = p.size();
    let a = p.entries() - DMatrix::identity(n, n);
    let pi = solve_stationary(&a)?;
    Ok(ProbabilityVector::from_trusted(p.space().clone(), pi))
}

/// The unique invariant law of an irreducible generator (`πL = 0`).
pub fn generator_stationary(l: &Generator) -> Result<ProbabilityVector> {
    if !l.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let pi = solve_stationary(l.rates())?;
    Ok(ProbabilityVector::from_trusted(l.space().clone(), pi))
}

/// `‖πP − π‖∞`.
pub fn stationary_residual(p: &StochasticMatrix, pi: &ProbabilityVector) -> f64 {
    (p.entries().tr_mul(pi.as_dvector()) - pi.as_dvector()).amax()
}

/// `‖πL‖∞`.
pub fn generator_residual(l: &Generator, pi: &ProbabilityVector) -> f64 {
    l.rates().tr_mul(pi.as_dvector()).amax()
}

/// Time reversal `P⋆(x, y) = π(y) P(y, x) / π(x)` in `L²(π)`.
pub fn adjoint(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<StochasticMatrix> {
    ensure_same_space(p.space(), pi.space())?;
    let resid = stationary_residual(p, pi);
    if resid > STATIONARY_TOL {
        return Err(Error::StationaryMismatch(resid));
    }
    let w = pi.weights();
    if w.iter().any(|&v| v <= 0.0) {
        return Err(Error::StationaryMismatch(resid));
    }
    let n = p.size();
    let star = DMatrix::from_fn(n, n, |x, y| w[y] * p.get(y, x) / w[x]);
    Ok(StochasticMatrix::from_trusted(p.space().clone(), star))
}

/// Time reversal of a generator, `L⋆(x, y) = π(y) L(y, x) / π(x)`.
pub fn generator_adjoint(l: &Generator, pi: &ProbabilityVector) -> Result<Generator> {
    ensure_same_space(l.space(), pi.space())?;
    let resid = generator_residual(l, pi);
    let scale = l.uniformization_rate().max(1.0);
    if resid > STATIONARY_TOL * scale {
        return Err(Error::StationaryMismatch(resid));
    }
    let w = pi.weights();
    let n = l.size();
    let mut star = DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            0.0
        } else {
            w[y] * l.get(y, x) / w[x]
        }
    });
    for i in 0..n {
        let out: f64 = star.row(i).sum();
        star[(i, i)] = -out;
    }
    Ok(Generator {
        space: l.space().clone(),
        rates: star,
    })
}

/// Poisson(λ) weights `w_0..w_K` with `K ≥ λ` chosen so the neglected tail is
/// below [`UNIFORMIZATION_TAIL`]. Built by ratio recursion outward from the mode
/// and normalized at the end, so large `λ` neither underflows nor accumulates
/// cancellation error.
pub(crate) fn poisson_weights(lambda: f64) -> Vec<f64> {
    let mode = lambda.floor() as usize;
    let mut weights = vec![0.0; mode + 1];
    weights[mode] = 1.0;
    for k in (1..=mode).rev() {
        weights[k - 1] = weights[k] * k as f64 / lambda;
    }
    let mut total: f64 = weights.iter().sum();
    let mut k = mode;
    loop {
        let kf = k as f64;
        let next = weights[k] * lambda / (kf + 1.0);
        if kf + 2.0 > lambda {
            // Σ_{j>k} w_j ≤ w_{k+1} / (1 − λ/(k+2))
            let tail = next / (1.0 - lambda / (kf + 2.0));
            if tail < UNIFORMIZATION_TAIL * total {
                break;
            }
        }
        weights.push(next);
        total += next;
        k += 1;
    }
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// `e^{tL}` by uniformization: `Σ_k Poisson(Λt)_k K^k` with `K = I + L/Λ`.
pub fn semigroup_at(l: &Generator, t: f64) -> Result<StochasticMatrix> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::NonFiniteTime(t));
    }
    let n = l.size();
    let rate = l.uniformization_rate();
    if t == 0.0 || rate == 0.0 {
        return Ok(StochasticMatrix::identity(l.space().clone()));
    }
    let k = l.uniformized_kernel();
    let kmat = k.entries();
    let weights = poisson_weights(rate * t);
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut scratch = DMatrix::<f64>::zeros(n, n);
    let total: f64 = weights.iter().sum();
    for (idx, w) in weights.iter().enumerate() {
        if idx > 0 {
            power.mul_to(kmat, &mut scratch);
            std::mem::swap(&mut power, &mut scratch);
        }
        if *w > 0.0 {
            acc += &power * (*w / total);
        }
    }
    Ok(StochasticMatrix::from_trusted(l.space().clone(), acc))
}

/// `P_ε(x, y) = (1 − ε) P(x, y) + ε π(y)`.
pub fn perturb(p: &StochasticMatrix, pi: &ProbabilityVector, eps: f64) -> Result<StochasticMatrix> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadEpsilon(eps));
    }
    ensure_same_space(p.space(), pi.space())?;
    let n = p.size();
    let w = pi.weights();
    let m = DMatrix::from_fn(n, n, |x, y| (1.0 - eps) * p.get(x, y) + eps * w[y]);
    Ok(StochasticMatrix::from_trusted(p.space().clone(), m))
}
