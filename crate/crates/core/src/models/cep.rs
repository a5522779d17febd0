//! Colored exclusion process on `𝕊ⁿ`: pair swaps at rates `c(i,j)` and
//! single-site refreshes from `ν` at rates `r(i)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundCurve, BoundKind};
use crate::chain::{generator_residual, Generator, ProbabilityVector, StateSpace, ROW_SUM_TOL, STATIONARY_TOL};
use crate::entropy::check_times;
use crate::error::{Error, Result};
use crate::metric::{hamming, GeneratingSet, MetricSpace};

use super::{check_cap, decode, encode, ContinuousModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CepSpec {
    pub colors: Vec<String>,
    pub nu: Vec<f64>,
    pub n: usize,
    /// Symmetric exchange rates with zero diagonal.
    pub c: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

impl CepSpec {
    pub fn validate(&self) -> Result<()> {
        let q = self.colors.len();
        if q == 0 || self.n == 0 {
            return Err(Error::EmptySpace);
        }
        if self.nu.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: self.nu.len(),
            });
        }
        if self.nu.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NotProbability("color law must be fully supported".into()));
        }
        if (self.nu.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotProbability("color law must sum to 1".into()));
        }
        let n = self.n;
        if self.c.len() != n || self.c.iter().any(|row| row.len() != n) || self.r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.c.len(),
            });
        }
        for i in 0..n {
            if self.c[i][i] != 0.0 {
                return Err(Error::BadRates(format!("c({i},{i}) must be zero")));
            }
            if !(self.r[i] >= 0.0) || !self.r[i].is_finite() {
                return Err(Error::BadRates(format!("refresh rate r({i}) must be non-negative")));
            }
            for j in 0..n {
                let v = self.c[i][j];
                if !(v >= 0.0) || !v.is_finite() || v != self.c[j][i] {
                    return Err(Error::BadRates(format!("c({i},{j}) must be symmetric and non-negative")));
                }
            }
        }
        Ok(())
    }

    /// Every connected component of the exchange graph must contain a refreshed site.
    fn refresh_reaches_all(&self) -> bool {
        let n = self.n;
        let mut comp = vec![usize::MAX; n];
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = s;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if self.c[u][v] > 0.0 && comp[v] == usize::MAX {
                        comp[v] = s;
                        stack.push(v);
                    }
                }
            }
        }
        (0..n).all(|i| (0..n).any(|k| comp[k] == comp[i] && self.r[k] > 0.0))
    }

    /// The Laplace matrix `Δ` of the killed walk.
    pub fn laplace(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -self.r[i] - (0..n).filter(|&k| k != i).map(|k| self.c[i][k]).sum::<f64>()
            } else {
                self.c[i][j]
            }
        })
    }
}

pub fn build_cep(spec: &CepSpec) -> Result<ContinuousModel> {
    spec.validate()?;
    let (q, n) = (spec.colors.len(), spec.n);
    let states = q
        .checked_pow(n as u32)
        .ok_or(Error::TooLarge {
            states: usize::MAX,
            cap: super::state_cap(),
        })?;
    check_cap(states)?;
    if q > 1 && !spec.refresh_reaches_all() {
        return Err(Error::NotIrreducible);
    }
    let words: Vec<Vec<usize>> = (0..states).map(|k| decode(k, q, n)).collect();
    let labels = words
        .iter()
        .map(|w| w.iter().map(|&c| spec.colors[c].as_str()).collect::<Vec<_>>().join(","));
    let space = StateSpace::new(labels)?;

    let mut rates = DMatrix::zeros(states, states);
    for (x, w) in words.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                if spec.c[i][j] > 0.0 && w[i] != w[j] {
                    let mut v = w.clone();
                    v.swap(i, j);
                    rates[(x, encode(&v, q))] += spec.c[i][j];
                }
            }
            if spec.r[i] > 0.0 {
                for (sigma, &p) in spec.nu.iter().enumerate() {
                    if sigma != w[i] {
                        let mut v = w.clone();
                        v[i] = sigma;
                        rates[(x, encode(&v, q))] += spec.r[i] * p;
                    }
                }
            }
        }
    }
    let generator = Generator::from_off_diagonal(space.clone(), rates)?;
    let pi_w: Vec<f64> = words.iter().map(|w| w.iter().map(|&c| spec.nu[c]).product()).collect();
    let pi = ProbabilityVector::normalized(space.clone(), pi_w)?;
    let resid = generator_residual(&generator, &pi);
    if resid > STATIONARY_TOL * generator.uniformization_rate().max(1.0) {
        return Err(Error::StationaryMismatch(resid));
    }
    let metric = MetricSpace::from_trusted(
        space,
        DMatrix::from_fn(states, states, |x, y| hamming(&words[x], &words[y]) as f64),
    );
    let mut pairs = Vec::new();
    for (x, w) in words.iter().enumerate() {
        for i in 0..n {
            for sigma in w[i] + 1..q {
                let mut v = w.clone();
                v[i] = sigma;
                pairs.push((x, encode(&v, q)));
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

/// `max_i P_i(T > t)` for the walk with conductances `c` killed at rate `r`,
/// from the spectral decomposition of `−Δ`.
pub fn cep_killed_tail(spec: &CepSpec, times: &[f64]) -> Result<BoundCurve> {
    spec.validate()?;
    check_times(times)?;
    let n = spec.n;
    let eig = SymmetricEigen::new(-spec.laplace());
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lambda_min <= 1e-12 {
        return Err(Error::SingularLaplacian(lambda_min));
    }
    let phi = &eig.eigenvectors;
    let mass: Vec<f64> = (0..n).map(|k| phi.column(k).sum()).collect();
    let values = times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|k| (-eig.eigenvalues[k] * t).exp() * phi[(i, k)] * mass[k])
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
                .clamp(0.0, 1.0)
        })
        .collect();
    BoundCurve::new(times.to_vec(), values, BoundKind::ModelSpecific)
}
