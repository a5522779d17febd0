//! Random instances and plain-loop oracles shared by the integration tests.
#![allow(dead_code)]

use curvlab::chain::{Generator, StateSpace, StochasticMatrix};
use curvlab::metric::{closure_from_pairs, GeneratingSet, MetricSpace};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

pub fn space(n: usize) -> StateSpace {
    StateSpace::indexed(n).unwrap()
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    Exp1.sample(rng)
}

/// Random irreducible kernel; the shape is picked among dense, sparse,
/// lazy and "lazy rank-one" families.
pub fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> StochasticMatrix {
    let shape = rng.random_range(0..4);
    let mut rows = vec![vec![0.0; n]; n];
    match shape {
        0 => {
            for row in rows.iter_mut() {
                row.iter_mut().for_each(|v| *v = exp1(rng));
            }
        }
        1 => {
            // sparse with a cycle to keep it irreducible
            for (x, row) in rows.iter_mut().enumerate() {
                row[(x + 1) % n] = exp1(rng);
                for v in row.iter_mut() {
                    if rng.random_bool(0.35) {
                        *v += exp1(rng);
                    }
                }
            }
        }
        2 => {
            let a: f64 = rng.random_range(0.05..0.95);
            for (x, row) in rows.iter_mut().enumerate() {
                let mut q: Vec<f64> = (0..n).map(|_| exp1(rng)).collect();
                normalize(&mut q);
                for (y, v) in row.iter_mut().enumerate() {
                    *v = a * q[y] + if x == y { 1.0 - a } else { 0.0 };
                }
            }
        }
        _ => {
            let a: f64 = rng.random_range(0.05..1.0);
            let mut nu: Vec<f64> = (0..n).map(|_| exp1(rng)).collect();
            normalize(&mut nu);
            for (x, row) in rows.iter_mut().enumerate() {
                for (y, v) in row.iter_mut().enumerate() {
                    *v = a * nu[y] + if x == y { 1.0 - a } else { 0.0 };
                }
            }
        }
    }
    for row in rows.iter_mut() {
        normalize(row);
    }
    StochasticMatrix::from_rows(space(n), &rows).unwrap()
}

/// Random irreducible generator with off-diagonal rates in `(0, 3)`.
pub fn random_generator(rng: &mut ChaCha8Rng, n: usize) -> Generator {
    let mut rates = DMatrix::zeros(n, n);
    for x in 0..n {
        rates[(x, (x + 1) % n)] = rng.random_range(0.1..3.0);
        for y in 0..n {
            if y != x && rng.random_bool(0.4) {
                rates[(x, y)] += rng.random_range(0.0..3.0);
            }
        }
    }
    Generator::from_off_diagonal(space(n), rates).unwrap()
}

/// Shortest-path metric of a random connected weighted graph.
pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> (MetricSpace, GeneratingSet) {
    let mut pairs = Vec::new();
    for y in 1..n {
        let x = rng.random_range(0..y);
        pairs.push((x, y, rng.random_range(0.5..2.0)));
    }
    for x in 0..n {
        for y in x + 1..n {
            if rng.random_bool(0.3) {
                pairs.push((x, y, rng.random_range(0.5..2.0)));
            }
        }
    }
    closure_from_pairs(space(n), &pairs).unwrap()
}

/// Random probability vector: Dirichlet(1), sparse support, a Dirac mass or a
/// small perturbation of `pi`.
pub fn random_measure(rng: &mut ChaCha8Rng, pi: &[f64]) -> Vec<f64> {
    let n = pi.len();
    let mut mu: Vec<f64> = match rng.random_range(0..4) {
        0 => (0..n).map(|_| exp1(rng)).collect(),
        1 => {
            let mut v: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { exp1(rng) } else { 0.0 }).collect();
            v[rng.random_range(0..n)] += exp1(rng);
            v
        }
        2 => {
            let mut v = vec![0.0; n];
            v[rng.random_range(0..n)] = 1.0;
            v
        }
        _ => {
            let scale: f64 = 10f64.powf(rng.random_range(-4.0..-0.5));
            pi.iter().map(|&p| p * (1.0 + scale * rng.random_range(-1.0..1.0))).collect()
        }
    };
    normalize(&mut mu);
    mu
}

pub fn kl(mu: &[f64], pi: &[f64]) -> f64 {
    mu.iter()
        .zip(pi)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &p)| m * (m / p).ln())
        .sum::<f64>()
        .max(0.0)
}

pub fn push(mu: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    let n = mu.len();
    (0..n).map(|y| (0..n).map(|x| mu[x] * p[(x, y)]).sum()).collect()
}

/// Left null vector of `P − I`, by an LU solve with the normalization as one equation.
pub fn stationary(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for y in 0..n {
        a[(n - 1, y)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).unwrap();
    x.iter().copied().collect()
}

pub fn adjoint(p: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = p.nrows();
    DMatrix::from_fn(n, n, |x, y| pi[y] * p[(y, x)] / pi[x])
}

/// `e^{tL}` by nalgebra's Padé exponential.
pub fn expm(l: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (l * t).exp()
}

pub fn lipschitz(f: &[f64], d: &MetricSpace) -> f64 {
    let n = f.len();
    let mut best: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                best = best.max((f[x] - f[y]).abs() / d.dist(x, y));
            }
        }
    }
    best
}

pub fn kernel(m: &DMatrix<f64>) -> StochasticMatrix {
    let n = m.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut r: Vec<f64> = m.row(x).iter().map(|v| v.max(0.0)).collect();
            normalize(&mut r);
            r
        })
        .collect();
    StochasticMatrix::from_rows(space(n), &rows).unwrap()
}

pub fn times(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}
