//! Builders for the five model families: birth–death processes, colored
//! exclusion, hypergraph interchange, Glauber dynamics and zero-range processes.
//!
//! Every builder materializes a dense generator (or kernel) together with its
//! stationary law, the metric under which it has non-negative sectional
//! curvature and a generating set for that metric.

pub mod bdp;
pub mod cep;
pub mod glauber;
pub mod interchange;
pub mod zrp;

use nalgebra::DMatrix;

use crate::chain::{poisson_weights, Generator, ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};
use crate::metric::{GeneratingSet, MetricSpace};

pub use bdp::{bdp_delta, bdp_m_curve, bdp_monotone, build_bdp, BdpCurves, BirthDeathSpec};
pub use cep::{build_cep, cep_killed_tail, CepSpec};
pub use glauber::{
    build_glauber, glauber_weakdep, solve_epsilon_q, spin_influences, GlauberTarget, Interaction, SpinSystem,
    WeakDependency,
};
pub use interchange::{build_interchange, Block, interchange_meeting_tail, single_particle_conductances, InterchangeSpec};
pub use zrp::{build_zrp, zrp_monotone, zrp_states, ZrpMonotonicity, ZrpSpec};

/// Default ceiling on materialized state counts.
pub const DEFAULT_STATE_CAP: usize = 20_000;
/// Environment variable overriding [`DEFAULT_STATE_CAP`].
pub const STATE_CAP_ENV: &str = "CURVLAB_STATE_CAP";

/// The state cap in effect.
pub fn state_cap() -> usize {
    std::env::var(STATE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STATE_CAP)
}

pub(crate) fn check_cap(states: usize) -> Result<()> {
    let cap = state_cap();
    if states > cap {
        return Err(Error::TooLarge { states, cap });
    }
    Ok(())
}

/// A continuous-time model with its geometry.
#[derive(Clone, Debug)]
pub struct ContinuousModel {
    pub generator: Generator,
    pub pi: ProbabilityVector,
    pub metric: MetricSpace,
    pub generating_set: GeneratingSet,
}

/// A discrete-time model with its geometry.
#[derive(Clone, Debug)]
pub struct DiscreteModel {
    pub kernel: StochasticMatrix,
    pub pi: ProbabilityVector,
    pub metric: MetricSpace,
    pub generating_set: GeneratingSet,
}

/// Survival probabilities `(e^{tQ} 1)(i)` of a killed chain with sub-generator `Q`
/// (non-negative off-diagonal, row sums ≤ 0), by uniformization.
pub(crate) fn killed_survival(q: &DMatrix<f64>, t: f64) -> Vec<f64> {
    let n = q.nrows();
    let rate = (0..n).map(|i| -q[(i, i)]).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        return vec![1.0; n];
    }
    let k = DMatrix::identity(n, n) + q / rate;
    let weights = poisson_weights(rate * t);
    let mut v = nalgebra::DVector::from_element(n, 1.0);
    let mut acc = nalgebra::DVector::zeros(n);
    for (idx, w) in weights.iter().enumerate() {
        if idx > 0 {
            v = &k * &v;
        }
        acc += &v * *w;
    }
    acc.iter().map(|p| p.clamp(0.0, 1.0)).collect()
}

/// Row-major index of a word over an alphabet of size `q`, first letter most significant.
pub(crate) fn encode(word: &[usize], q: usize) -> usize {
    word.iter().fold(0, |acc, &c| acc * q + c)
}

pub(crate) fn decode(mut index: usize, q: usize, n: usize) -> Vec<usize> {
    let mut w = vec![0; n];
    for i in (0..n).rev() {
        w[i] = index % q;
        index /= q;
    }
    w
}
