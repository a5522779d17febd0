//! Zero-range process: `m` particles on `n` sites, site `i` expels a particle at
//! rate `r_i(x_i)` which lands on `j` with probability `G_ij`.
//!
//! States are the compositions of `m` into `n` parts in colexicographic order
//! (compare the last coordinate first), labeled like `"2,0,1"`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{
    generator_residual, stationary_distribution, Generator, ProbabilityVector, StateSpace, StochasticMatrix,
    ROW_SUM_TOL, STATIONARY_TOL,
};
use crate::error::{Error, Result};
use crate::metric::{half_l1, GeneratingSet, MetricSpace};

use super::{check_cap, ContinuousModel};

/// `rates[i][k−1] = r_i(k)` for `k = 1..m`, optionally extended to `k = m+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZrpSpec {
    pub m: usize,
    pub g: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
}

impl ZrpSpec {
    /// Rank-one geometry `G_ij = ν_j` with the same rate function at every site.
    pub fn mean_field(m: usize, nu: &[f64], rate: impl Fn(usize) -> f64) -> Self {
        let n = nu.len();
        ZrpSpec {
            m,
            g: vec![nu.to_vec(); n],
            rates: vec![(1..=m).map(rate).collect(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// `r_i(k)` with `r_i(0) = 0`.
    pub fn rate(&self, i: usize, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.rates[i][k - 1]
        }
    }

    fn kernel(&self) -> Result<StochasticMatrix> {
        let n = self.n();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        let g = StochasticMatrix::from_rows(StateSpace::indexed(n)?, &self.g)?;
        if !g.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.m == 0 {
            return Err(Error::BadRates("at least one particle is required".into()));
        }
        self.kernel()?;
        if self.rates.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.rates.len(),
            });
        }
        for (i, r) in self.rates.iter().enumerate() {
            if r.len() != self.m && r.len() != self.m + 1 {
                return Err(Error::BadRates(format!(
                    "site {i} lists {} rates, expected {} or {}",
                    r.len(),
                    self.m,
                    self.m + 1
                )));
            }
            if r.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::BadRates(format!("rates at site {i} must be positive")));
            }
        }
        Ok(())
    }

    /// The invariant law `ν` of `G`.
    pub fn nu(&self) -> Result<Vec<f64>> {
        Ok(stationary_distribution(&self.kernel()?)?.weights().to_vec())
    }

    /// The same process with `G` replaced by its `ν`-adjoint.
    pub fn adjoint(&self) -> Result<ZrpSpec> {
        let nu = self.nu()?;
        let n = self.n();
        let g = (0..n)
            .map(|i| (0..n).map(|j| nu[j] * self.g[j][i] / nu[i]).collect::<Vec<f64>>())
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Ok(ZrpSpec {
            m: self.m,
            g,
            rates: self.rates.clone(),
        })
    }

    /// Whether every row of `G` is the same, i.e. `G_ij = ν_j`.
    pub fn is_mean_field(&self) -> bool {
        self.g
            .iter()
            .all(|row| row.iter().zip(&self.g[0]).all(|(a, b)| (a - b).abs() <= ROW_SUM_TOL))
    }
}

/// Compositions of `m` into `n` non-negative parts, colexicographic order.
pub fn zrp_states(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, left: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(prefix, left - k, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(&mut Vec::new(), m, n, &mut out);
    }
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

pub fn build_zrp(spec: &ZrpSpec) -> Result<ContinuousModel> {
    spec.validate()?;
    let (n, m) = (spec.n(), spec.m);
    check_cap(binomial(m + n - 1, n - 1).unwrap_or(usize::MAX))?;
    let states = zrp_states(n, m);
    let index: HashMap<&[usize], usize> = states.iter().enumerate().map(|(k, s)| (s.as_slice(), k)).collect();
    let label = |x: &[usize]| x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    let space = StateSpace::new(states.iter().map(|x| label(x)))?;
    let size = states.len();

    let mut rates = DMatrix::zeros(size, size);
    for (a, x) in states.iter().enumerate() {
        for i in (0..n).filter(|&i| x[i] > 0) {
            for j in (0..n).filter(|&j| j != i && spec.g[i][j] > 0.0) {
                let mut y = x.clone();
                y[i] -= 1;
                y[j] += 1;
                rates[(a, index[y.as_slice()])] += spec.rate(i, x[i]) * spec.g[i][j];
            }
        }
    }
    let generator = Generator::from_off_diagonal(space.clone(), rates)?;

    let nu = spec.nu()?;
    let log_w: Vec<f64> = states
        .iter()
        .map(|x| {
            (0..n)
                .map(|i| x[i] as f64 * nu[i].ln() - (1..=x[i]).map(|k| spec.rate(i, k).ln()).sum::<f64>())
                .sum()
        })
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pi = ProbabilityVector::normalized(space.clone(), log_w.iter().map(|l| (l - top).exp()).collect::<Vec<_>>())?;
    let resid = generator_residual(&generator, &pi);
    if resid > STATIONARY_TOL * generator.uniformization_rate().max(1.0) {
        return Err(Error::StationaryMismatch(resid));
    }

    let metric = MetricSpace::from_trusted(space, DMatrix::from_fn(size, size, |a, b| half_l1(&states[a], &states[b])));
    let mut pairs = Vec::new();
    for z in zrp_states(n, m - 1) {
        for i in 0..n {
            for j in i + 1..n {
                let (mut x, mut y) = (z.clone(), z.clone());
                x[i] += 1;
                y[j] += 1;
                pairs.push((index[x.as_slice()], index[y.as_slice()]));
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

/// Rate monotonicity and the extreme increments of the rate functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZrpMonotonicity {
    /// `r_i(k) ≥ r_i(k−1)` for `k = 1..m`
    pub holds: bool,
    /// `min r_i(k+1) − r_i(k)` over `k = 0..m−1`, the occupancies a tagged walk can see
    pub delta: f64,
    /// `max r_i(k+1) − r_i(k)` over the same range
    pub big_delta: f64,
    /// `min r_i(k+1) − r_i(k)` over `k = 1..m`, when every `r_i(m+1)` is given
    pub delta_shifted: Option<f64>,
}

pub fn zrp_monotone(spec: &ZrpSpec) -> Result<ZrpMonotonicity> {
    spec.validate()?;
    let (n, m) = (spec.n(), spec.m);
    let mut holds = true;
    let (mut delta, mut big_delta) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for k in 0..m {
            let inc = spec.rate(i, k + 1) - spec.rate(i, k);
            holds &= inc >= 0.0;
            delta = delta.min(inc);
            big_delta = big_delta.max(inc);
        }
    }
    let delta_shifted = spec
        .rates
        .iter()
        .all(|r| r.len() == m + 1)
        .then(|| {
            (0..n)
                .flat_map(|i| (1..=m).map(move |k| (i, k)))
                .map(|(i, k)| spec.rate(i, k + 1) - spec.rate(i, k))
                .fold(f64::INFINITY, f64::min)
        });
    Ok(ZrpMonotonicity {
        holds,
        delta,
        big_delta,
        delta_shifted,
    })
}
