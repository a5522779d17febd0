//! Birth–death processes on `{1, …, n}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundCurve, BoundKind};
use crate::chain::{generator_residual, semigroup_at, Generator, ProbabilityVector, StateSpace, STATIONARY_TOL};
use crate::entropy::check_times;
use crate::error::{Error, Result};
use crate::metric::{GeneratingSet, MetricSpace};

use super::{check_cap, killed_survival, ContinuousModel};

/// Up rates `q_plus[x−1] = q₊(x)` and down rates `q_minus[x−1] = q₋(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthDeathSpec {
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
}

impl BirthDeathSpec {
    /// Unit rates in the interior.
    pub fn unit(n: usize) -> Self {
        let mut q_plus = vec![1.0; n];
        let mut q_minus = vec![1.0; n];
        if n > 0 {
            q_plus[n - 1] = 0.0;
            q_minus[0] = 0.0;
        }
        BirthDeathSpec { q_plus, q_minus }
    }

    pub fn n(&self) -> usize {
        self.q_plus.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q_plus.len();
        if n == 0 {
            return Err(Error::BadRates("at least one site is required".into()));
        }
        if self.q_minus.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.q_minus.len(),
            });
        }
        if self.q_minus[0] != 0.0 || self.q_plus[n - 1] != 0.0 {
            return Err(Error::BadRates("q_minus(1) and q_plus(n) must vanish".into()));
        }
        for x in 0..n {
            let up_ok = x == n - 1 || (self.q_plus[x].is_finite() && self.q_plus[x] > 0.0);
            let down_ok = x == 0 || (self.q_minus[x].is_finite() && self.q_minus[x] > 0.0);
            if !up_ok || !down_ok {
                return Err(Error::BadRates(format!("rates at site {} must be positive", x + 1)));
            }
        }
        Ok(())
    }
}

/// `π(x) ∝ Π_{k=2}^{x} q₊(k−1)/q₋(k)`, computed in log space.
pub fn bdp_stationary(spec: &BirthDeathSpec) -> Vec<f64> {
    let n = spec.n();
    let mut logw = vec![0.0; n];
    for x in 1..n {
        logw[x] = logw[x - 1] + spec.q_plus[x - 1].ln() - spec.q_minus[x].ln();
    }
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn build_bdp(spec: &BirthDeathSpec) -> Result<ContinuousModel> {
    spec.validate()?;
    let n = spec.n();
    check_cap(n)?;
    let space = StateSpace::new((1..=n).map(|x| x.to_string()))?;
    let mut rates = DMatrix::zeros(n, n);
    for x in 0..n {
        if x + 1 < n {
            rates[(x, x + 1)] = spec.q_plus[x];
        }
        if x > 0 {
            rates[(x, x - 1)] = spec.q_minus[x];
        }
    }
    let generator = Generator::from_off_diagonal(space.clone(), rates)?;
    let pi = ProbabilityVector::new(space.clone(), bdp_stationary(spec))?;
    let resid = generator_residual(&generator, &pi);
    if resid > STATIONARY_TOL * generator.uniformization_rate().max(1.0) {
        return Err(Error::StationaryMismatch(resid));
    }
    let metric = MetricSpace::from_trusted(space.clone(), DMatrix::from_fn(n, n, |x, y| x.abs_diff(y) as f64));
    let generating_set = GeneratingSet::certified((1..n).map(|x| (x - 1, x)).collect(), &metric);
    Ok(ContinuousModel {
        generator,
        pi,
        metric,
        generating_set,
    })
}

/// `q₊(x+1) ≤ q₊(x)` and `q₋(x+1) ≥ q₋(x)` for all `x < n`.
pub fn bdp_monotone(spec: &BirthDeathSpec) -> bool {
    let n = spec.n();
    (0..n.saturating_sub(1)).all(|x| spec.q_plus[x + 1] <= spec.q_plus[x] && spec.q_minus[x + 1] >= spec.q_minus[x])
}

/// `δ = min_{x<n} {q₊(x) − q₊(x+1) + q₋(x+1) − q₋(x)}`; `+∞` for a single site.
pub fn bdp_delta(spec: &BirthDeathSpec) -> f64 {
    let n = spec.n();
    (0..n.saturating_sub(1))
        .map(|x| spec.q_plus[x] - spec.q_plus[x + 1] + spec.q_minus[x + 1] - spec.q_minus[x])
        .fold(f64::INFINITY, f64::min)
}

/// `m(t)` with its two analytic upper bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BdpCurves {
    /// `m(t) = max_{x<n} (E_{x+1}[X_t] − E_x[X_t])`
    pub m: BoundCurve,
    /// `e^{−δt}`
    pub gronwall: BoundCurve,
    /// `P₁(T_n > t) ∧ P_n(T₁ > t)`
    pub hitting: BoundCurve,
    pub delta: f64,
}

impl BdpCurves {
    /// Pointwise minimum of the two analytic bounds.
    pub fn best_bound(&self) -> Vec<f64> {
        self.gronwall
            .values()
            .iter()
            .zip(self.hitting.values())
            .map(|(a, b)| a.min(*b))
            .collect()
    }
}

/// Exact `P₁(T_n > t) ∧ P_n(T₁ > t)` from the absorbed chains.
pub fn bdp_hitting_tail(model: &ContinuousModel, t: f64) -> f64 {
    let l = model.generator.rates();
    let n = l.nrows();
    if n < 2 {
        return 0.0;
    }
    // kill on reaching n: keep sites 1..n−1
    let up = l.view((0, 0), (n - 1, n - 1)).into_owned();
    // kill on reaching 1: keep sites 2..n
    let down = l.view((1, 1), (n - 1, n - 1)).into_owned();
    let a = killed_survival(&up, t)[0];
    let b = killed_survival(&down, t)[n - 2];
    a.min(b)
}

pub fn bdp_m_curve(spec: &BirthDeathSpec, times: &[f64]) -> Result<BdpCurves> {
    spec.validate()?;
    check_times(times)?;
    if !bdp_monotone(spec) {
        return Err(Error::MonotonicityViolated(
            "birth–death rates need q_plus non-increasing and q_minus non-decreasing".into(),
        ));
    }
    if spec.n() < 2 {
        return Err(Error::BadRates("m(t) needs at least two sites".into()));
    }
    let model = build_bdp(spec)?;
    let n = spec.n();
    let rows = times
        .par_iter()
        .map(|&t| {
            let pt = semigroup_at(&model.generator, t)?;
            let mean: Vec<f64> = (0..n)
                .map(|x| (0..n).map(|y| pt.get(x, y) * (y + 1) as f64).sum())
                .collect();
            let m = (0..n - 1).map(|x| mean[x + 1] - mean[x]).fold(f64::NEG_INFINITY, f64::max);
            Ok((m.clamp(0.0, 1.0), bdp_hitting_tail(&model, t)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let delta = bdp_delta(spec);
    Ok(BdpCurves {
        m: BoundCurve::new(times.to_vec(), rows.iter().map(|r| r.0).collect(), BoundKind::ModelSpecific)?,
        gronwall: BoundCurve::new(
            times.to_vec(),
            times.iter().map(|t| (-delta * t).exp()).collect(),
            BoundKind::ModelSpecific,
        )?,
        hitting: BoundCurve::new(times.to_vec(), rows.iter().map(|r| r.1).collect(), BoundKind::ModelSpecific)?,
        delta,
    })
}
