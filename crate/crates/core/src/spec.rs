//! Serialized chain descriptions and their materialization.
//!
//! A [`ChainSpec`] is a JSON document tagged by `kind`. The published schema
//! lives in `schema/chainspec.schema.json`; parsing is strict (unknown fields
//! are rejected) and every document is re-validated when it is built.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{exp_curve, BoundCurve, BoundKind};
use crate::chain::{stationary_distribution, Generator, StateSpace, StochasticMatrix};
use crate::error::{Error, Result};
use crate::metric::{combinatorial_distance, trivial_metric, verify_generating, GeneratingSet, MetricSpace};
use crate::models::{
    bdp_m_curve, bdp_monotone, build_bdp, build_cep, build_glauber, build_interchange, build_zrp, cep_killed_tail,
    glauber_weakdep, interchange_meeting_tail, zrp_monotone, BirthDeathSpec, CepSpec, ContinuousModel,
    DiscreteModel, GlauberTarget, InterchangeSpec, SpinSystem, ZrpSpec,
};

/// The published JSON schema for [`ChainSpec`].
pub const SCHEMA: &str = include_str!("../schema/chainspec.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    /// `distances` supplies the matrix.
    Explicit,
    /// Shortest paths in the support graph of the chain.
    #[default]
    Combinatorial,
    /// `1_{x ≠ y}`
    Trivial,
}

/// A chain given entry by entry: either a kernel `matrix` or a `generator`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub metric: MetricChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    /// Label pairs generating the metric. When omitted: the graph edges for the
    /// combinatorial metric, all pairs otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generating_pairs: Option<Vec<(String, String)>>,
}

/// Explicit Glauber target weights on `alphabetⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlauberWeights {
    pub alphabet: Vec<String>,
    pub n: usize,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainSpec {
    Explicit(ExplicitSpec),
    Bdp(BirthDeathSpec),
    Cep(CepSpec),
    Interchange(InterchangeSpec),
    Glauber(GlauberWeights),
    Spin(SpinSystem),
    Zrp(ZrpSpec),
}

/// A materialized chain.
#[derive(Clone, Debug)]
pub enum Chain {
    Discrete(DiscreteModel),
    Continuous(ContinuousModel),
}

impl Chain {
    pub fn space(&self) -> &StateSpace {
        match self {
            Chain::Discrete(m) => m.kernel.space(),
            Chain::Continuous(m) => m.generator.space(),
        }
    }

    pub fn metric(&self) -> &MetricSpace {
        match self {
            Chain::Discrete(m) => &m.metric,
            Chain::Continuous(m) => &m.metric,
        }
    }

    pub fn generating_set(&self) -> &GeneratingSet {
        match self {
            Chain::Discrete(m) => &m.generating_set,
            Chain::Continuous(m) => &m.generating_set,
        }
    }

    /// The generator whose semigroup the curves follow; `P − I` for kernels.
    pub fn generator(&self) -> Generator {
        match self {
            Chain::Discrete(m) => Generator::from_kernel(&m.kernel),
            Chain::Continuous(m) => m.generator.clone(),
        }
    }
}

fn matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build_explicit(spec: &ExplicitSpec) -> Result<Chain> {
    let space = StateSpace::new(spec.labels.iter().cloned())?;
    let n = space.len();
    let (kernel, generator) = match (&spec.matrix, &spec.generator) {
        (Some(rows), None) => {
            let p = StochasticMatrix::new(space.clone(), matrix(rows, n)?)?;
            (Some(p), None)
        }
        (None, Some(rows)) => {
            let l = Generator::new(space.clone(), matrix(rows, n)?)?;
            (None, Some(l))
        }
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of `matrix` and `generator` is required".into(),
            ))
        }
    };
    let support_kernel = match (&kernel, &generator) {
        (Some(p), _) => p.clone(),
        (_, Some(l)) => l.uniformized_kernel(),
        _ => unreachable!(),
    };
    if !support_kernel.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let metric = match spec.metric {
        MetricChoice::Explicit => {
            let rows = spec
                .distances
                .as_ref()
                .ok_or_else(|| Error::InvalidMetric("`distances` is required for an explicit metric".into()))?;
            MetricSpace::new(space.clone(), matrix(rows, n)?)?
        }
        MetricChoice::Combinatorial => combinatorial_distance(&support_kernel)?,
        MetricChoice::Trivial => trivial_metric(space.clone()),
    };
    if spec.metric != MetricChoice::Explicit && spec.distances.is_some() {
        return Err(Error::InvalidMetric("`distances` is only allowed with an explicit metric".into()));
    }
    let generating_set = match &spec.generating_pairs {
        None if spec.metric == MetricChoice::Combinatorial => {
            let edges = (0..n)
                .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
                .filter(|&(x, y)| metric.dist(x, y) == 1.0)
                .collect();
            GeneratingSet::certified(edges, &metric)
        }
        None => metric.all_pairs(),
        Some(pairs) => {
            let idx = pairs
                .iter()
                .map(|(a, b)| Ok((space.index_of(a)?, space.index_of(b)?)))
                .collect::<Result<Vec<_>>>()?;
            let set = GeneratingSet::new(idx)?;
            if !verify_generating(&metric, &set) {
                return Err(Error::NotGenerating);
            }
            set
        }
    };
    Ok(match (kernel, generator) {
        (Some(kernel), _) => {
            let pi = stationary_distribution(&kernel)?;
            Chain::Discrete(DiscreteModel {
                kernel,
                pi,
                metric,
                generating_set,
            })
        }
        (_, Some(generator)) => {
            let pi = crate::chain::generator_stationary(&generator)?;
            Chain::Continuous(ContinuousModel {
                generator,
                pi,
                metric,
                generating_set,
            })
        }
        _ => unreachable!(),
    })
}

impl ChainSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Pretty JSON; floats use the shortest representation that round-trips.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain specs always serialize")
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ChainSpec::Explicit(_) => "explicit",
            ChainSpec::Bdp(_) => "bdp",
            ChainSpec::Cep(_) => "cep",
            ChainSpec::Interchange(_) => "interchange",
            ChainSpec::Glauber(_) => "glauber",
            ChainSpec::Spin(_) => "spin",
            ChainSpec::Zrp(_) => "zrp",
        }
    }

    fn glauber_target(&self) -> Option<GlauberTarget> {
        match self {
            ChainSpec::Glauber(w) => Some(GlauberTarget::Explicit {
                alphabet: w.alphabet.clone(),
                n: w.n,
                weights: w.weights.clone(),
            }),
            ChainSpec::Spin(s) => Some(GlauberTarget::Spin(s.clone())),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Chain> {
        match self {
            ChainSpec::Explicit(e) => build_explicit(e),
            ChainSpec::Bdp(s) => build_bdp(s).map(Chain::Continuous),
            ChainSpec::Cep(s) => build_cep(s).map(Chain::Continuous),
            ChainSpec::Interchange(s) => build_interchange(s).map(Chain::Continuous),
            ChainSpec::Zrp(s) => build_zrp(s).map(Chain::Continuous),
            ChainSpec::Glauber(_) | ChainSpec::Spin(_) => {
                build_glauber(&self.glauber_target().expect("glauber kinds have a target")).map(Chain::Discrete)
            }
        }
    }

    /// The family's own bound on `H(μP_t|π)/H(μ|π)`, when its hypotheses hold.
    /// Returns the curve with a short description.
    pub fn model_bound(&self, times: &[f64]) -> Result<Option<(BoundCurve, String)>> {
        Ok(match self {
            ChainSpec::Explicit(_) => None,
            ChainSpec::Bdp(s) => {
                if s.n() < 2 || !bdp_monotone(s) {
                    None
                } else {
                    Some((bdp_m_curve(s, times)?.m, "m(t)".into()))
                }
            }
            ChainSpec::Cep(s) => Some((cep_killed_tail(s, times)?, "max_i P_i(T > t), killed walk".into())),
            ChainSpec::Interchange(s) => {
                Some((interchange_meeting_tail(s, times)?, "max_ij P_ij(T > t), meeting walks".into()))
            }
            ChainSpec::Zrp(s) => {
                let mono = zrp_monotone(s)?;
                if s.is_mean_field() && mono.holds {
                    Some((
                        exp_curve(mono.delta, times, BoundKind::ModelSpecific)?,
                        format!("exp(-delta t), delta = {}", mono.delta),
                    ))
                } else {
                    None
                }
            }
            ChainSpec::Glauber(_) | ChainSpec::Spin(_) => {
                let wd = glauber_weakdep(&self.glauber_target().expect("glauber kinds have a target"))?;
                if wd.holds {
                    Some((
                        exp_curve(wd.kappa, times, BoundKind::ModelSpecific)?,
                        format!("exp(-kappa t), weak-dependency kappa = {}", wd.kappa),
                    ))
                } else {
                    None
                }
            }
        })
    }
}
