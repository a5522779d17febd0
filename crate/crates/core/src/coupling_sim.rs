//! Monte-Carlo simulation of explicit coalescing couplings.
//!
//! Each trajectory runs an exact next-event scheme until the two copies meet or
//! the horizon is reached, and reports its meeting time. Sample `k` draws from
//! a ChaCha8 stream keyed by `(seed, k)`, so serial and parallel runs agree bit
//! for bit.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::check_times;
use crate::error::{Error, Result};
use crate::metric::{half_l1, transposition_distance};
use crate::models::{bdp_monotone, zrp_monotone, BirthDeathSpec, InterchangeSpec, ZrpSpec};

/// Smallest sample count accepted by the simulators.
pub const MIN_SAMPLES: usize = 1000;

/// One point of an estimated tail `P(T > t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub mean: f64,
    /// `1.96 √(p̂(1−p̂)/N)`
    pub ci95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingEstimate {
    pub times: Vec<f64>,
    pub tail: Vec<TailPoint>,
    pub n_samples: usize,
    pub seed: u64,
}

impl CouplingEstimate {
    fn from_meeting_times(times: &[f64], meets: &[f64], seed: u64) -> Self {
        let n = meets.len();
        let tail = times
            .iter()
            .map(|&t| {
                let alive = meets.iter().filter(|&&m| m > t).count();
                let p = alive as f64 / n as f64;
                TailPoint {
                    mean: p,
                    ci95: 1.96 * (p * (1.0 - p) / n as f64).sqrt(),
                }
            })
            .collect();
        CouplingEstimate {
            times: times.to_vec(),
            tail,
            n_samples: n,
            seed,
        }
    }
}

/// ZRP tagged-walk coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZrpCoupling {
    /// Conditionally independent given the background until they meet.
    Independent,
    /// Mean-field only: a shared jump to `v` at rate `δ ν_v` merges the walks.
    SynchronizedRefresh,
}

fn sample_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn check_common(times: &[f64], n_samples: usize) -> Result<f64> {
    check_times(times)?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_SAMPLES,
            got: n_samples,
        });
    }
    Ok(times.last().copied().unwrap_or(0.0))
}

fn run(
    times: &[f64],
    n_samples: usize,
    seed: u64,
    trajectory: impl Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
) -> Result<CouplingEstimate> {
    let meets = (0..n_samples)
        .into_par_iter()
        .map(|k| trajectory(&mut sample_rng(seed, k)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CouplingEstimate::from_meeting_times(times, &meets, seed))
}

fn distance_grew(before: f64, after: f64) -> Result<()> {
    if after > before + 1e-12 {
        return Err(Error::Numerical(format!(
            "coupled distance increased from {before} to {after}"
        )));
    }
    Ok(())
}

/// Order-preserving coupling of the birth–death chain from `(x0, x0+1)`
/// (0-based states); estimates `P(X_t ≠ Y_t)`.
pub fn simulate_bdp_pair(
    spec: &BirthDeathSpec,
    x0: usize,
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CouplingEstimate> {
    spec.validate()?;
    let horizon = check_common(times, n_samples)?;
    if !bdp_monotone(spec) {
        return Err(Error::MonotonicityViolated(
            "birth–death rates need q_plus non-increasing and q_minus non-decreasing".into(),
        ));
    }
    let n = spec.n();
    if x0 + 1 >= n {
        return Err(Error::InvalidArgument(format!("start {x0} has no upper neighbour in {n} states")));
    }
    let (up, down) = (&spec.q_plus, &spec.q_minus);
    run(times, n_samples, seed, |rng| {
        let mut t = 0.0;
        let mut x = x0;
        loop {
            let y = x + 1;
            // both up, x alone up, both down, y alone down
            let rates = [up[y], up[x] - up[y], down[x], down[y] - down[x]];
            let total: f64 = rates.iter().sum();
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            if t > horizon {
                return Ok(f64::INFINITY);
            }
            let mut u = rng.random::<f64>() * total;
            let mut ev = 0;
            while ev < 3 && u >= rates[ev] {
                u -= rates[ev];
                ev += 1;
            }
            match ev {
                0 => x += 1,
                2 => x -= 1,
                _ => return Ok(t),
            }
        }
    })
}

/// Tagged-walk coupling of two ZRPs started at `z0 + δ_i` and `z0 + δ_j`,
/// where `z0` holds `m − 1` particles; estimates `P(I_t ≠ J_t)`.
pub fn simulate_zrp_pair(
    spec: &ZrpSpec,
    z0: &[usize],
    i: usize,
    j: usize,
    coupling: ZrpCoupling,
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CouplingEstimate> {
    let horizon = check_common(times, n_samples)?;
    let mono = zrp_monotone(spec)?;
    if !mono.holds {
        return Err(Error::MonotonicityViolated("zero-range rates must be non-decreasing".into()));
    }
    let n = spec.n();
    if z0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z0.len(),
        });
    }
    if z0.iter().sum::<usize>() + 1 != spec.m {
        return Err(Error::InvalidArgument(format!(
            "background must hold {} particles",
            spec.m - 1
        )));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidPair(i, j));
    }
    let nu = match coupling {
        ZrpCoupling::Independent => None,
        ZrpCoupling::SynchronizedRefresh => {
            if !spec.is_mean_field() {
                return Err(Error::InvalidArgument(
                    "synchronized refresh needs a rank-one geometry".into(),
                ));
            }
            Some(spec.g[0].clone())
        }
    };
    let delta = mono.delta;
    let g = &spec.g;
    let incr = |z: &[usize], u: usize| spec.rate(u, z[u] + 1) - spec.rate(u, z[u]);

    run(times, n_samples, seed, |rng| {
        if i == j {
            return Ok(0.0);
        }
        let (mut z, mut a, mut b) = (z0.to_vec(), i, j);
        let mut t = 0.0;
        let mut events: Vec<(f64, u8, usize, usize)> = Vec::new();
        loop {
            events.clear();
            // background particle u → v
            for u in (0..n).filter(|&u| z[u] > 0) {
                for v in (0..n).filter(|&v| v != u && g[u][v] > 0.0) {
                    events.push((spec.rate(u, z[u]) * g[u][v], 0, u, v));
                }
            }
            let (ra, rb) = (incr(&z, a), incr(&z, b));
            match &nu {
                None => {
                    for v in 0..n {
                        if v != a && g[a][v] > 0.0 {
                            events.push((ra * g[a][v], 1, a, v));
                        }
                        if v != b && g[b][v] > 0.0 {
                            events.push((rb * g[b][v], 2, b, v));
                        }
                    }
                }
                Some(nu) => {
                    for (v, &w) in nu.iter().enumerate() {
                        events.push((delta * w, 3, v, v));
                        if v != a {
                            events.push(((ra - delta) * w, 1, a, v));
                        }
                        if v != b {
                            events.push(((rb - delta) * w, 2, b, v));
                        }
                    }
                }
            }
            let total: f64 = events.iter().map(|e| e.0.max(0.0)).sum();
            if total <= 0.0 {
                return Ok(f64::INFINITY);
            }
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            if t > horizon {
                return Ok(f64::INFINITY);
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = events.len() - 1;
            for (k, ev) in events.iter().enumerate() {
                let w = ev.0.max(0.0);
                if u < w {
                    pick = k;
                    break;
                }
                u -= w;
            }
            let before = walk_distance(&z, a, b);
            let (_, kind, from, to) = events[pick];
            match kind {
                0 => {
                    z[from] -= 1;
                    z[to] += 1;
                }
                1 => a = to,
                2 => b = to,
                _ => {
                    a = to;
                    b = to;
                }
            }
            distance_grew(before, walk_distance(&z, a, b))?;
            if a == b {
                return Ok(t);
            }
        }
    })
}

fn walk_distance(z: &[usize], a: usize, b: usize) -> f64 {
    let mut x = z.to_vec();
    let mut y = z.to_vec();
    x[a] += 1;
    y[b] += 1;
    half_l1(&x, &y)
}

/// Synchronized-shuffle coupling of the interchange process from the identity
/// and the identity with positions `pair` swapped; a block covering every
/// disagreement forces coalescence. Estimates `P(X_t ≠ Y_t)`.
pub fn simulate_interchange_pair(
    spec: &InterchangeSpec,
    pair: (usize, usize),
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CouplingEstimate> {
    spec.validate()?;
    let horizon = check_common(times, n_samples)?;
    let n = spec.n;
    let (p, q) = pair;
    if p >= n || q >= n || p == q {
        return Err(Error::InvalidPair(p, q));
    }
    let blocks: Vec<&crate::models::interchange::Block> =
        spec.blocks.iter().filter(|b| b.rate > 0.0 && b.sites.len() > 1).collect();
    let total: f64 = blocks.iter().map(|b| b.rate).sum();
    if total <= 0.0 {
        return run(times, n_samples, seed, |_| Ok(f64::INFINITY));
    }
    let pick = WeightedIndex::new(blocks.iter().map(|b| b.rate))
        .map_err(|e| Error::BadRates(e.to_string()))?;
    run(times, n_samples, seed, |rng| {
        let mut x: Vec<usize> = (0..n).collect();
        let mut y = x.clone();
        y.swap(p, q);
        let mut t = 0.0;
        let mut shuffled = Vec::with_capacity(n);
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            if t > horizon {
                return Ok(f64::INFINITY);
            }
            let block = blocks[pick.sample(rng)];
            shuffled.clear();
            shuffled.extend_from_slice(&block.sites);
            shuffled.shuffle(rng);
            let agree_outside = (0..n).all(|k| x[k] == y[k] || block.sites.contains(&k));
            let before = transposition_distance(&x, &y) as f64;
            let (x0, y0) = (x.clone(), y.clone());
            for (&pos, &src) in block.sites.iter().zip(&shuffled) {
                x[pos] = x0[src];
                y[pos] = y0[src];
            }
            if agree_outside {
                y.clone_from(&x);
            }
            distance_grew(before, transposition_distance(&x, &y) as f64)?;
            if x == y {
                return Ok(t);
            }
        }
    })
}
