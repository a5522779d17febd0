//! Relative entropy, the contraction functional `ℋ(μ) = H(μP|π) / H(μ|π)`,
//! estimation of `α(P) = 1 − sup_{μ≠π} ℋ(μ)` and `λ₂(PP⋆)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::chain::{
    adjoint, ensure_same_space, generator_stationary, semigroup_at, stationary_distribution, Generator,
    ProbabilityVector, StochasticMatrix,
};
use crate::error::{Error, Result};

/// Below this, `H(μ|π)` is treated as zero.
pub const STATIONARITY_TOL: f64 = 1e-14;
/// Lower clip applied to masses during ascent.
pub const MASS_FLOOR: f64 = 1e-300;

const EIGEN_CLAMP_TOL: f64 = 1e-10;
const MAX_ASCENT_STEPS: usize = 4000;
const ARMIJO: f64 = 1e-4;
/// Masses below this are snapped to zero before polishing on a face.
const SNAP_MASS: f64 = 1e-10;
/// Faces up to this size get a Newton polish.
const POLISH_MAX_FACE: usize = 64;
const POLISH_STEPS: usize = 60;

/// `(1+h) log(1+h) − h`, accurate for small `h`.
fn phi(h: f64) -> f64 {
    if h.abs() < 1e-3 {
        // Σ_{k≥2} (−1)^k h^k / (k(k−1))
        let mut term = h * h;
        let mut sum = 0.0;
        for k in 2..9 {
            let kf = k as f64;
            sum += term / (kf * (kf - 1.0));
            term *= -h;
        }
        sum
    } else if h <= -1.0 {
        1.0
    } else {
        (1.0 + h) * h.ln_1p() - h
    }
}

/// `Σ π φ(h)` where `μ = (1 + h) π`. Equals `H(μ|π)` when both have unit mass.
fn entropy_from_excess(h: &[f64], pi: &[f64]) -> f64 {
    h.iter().zip(pi).map(|(&v, &p)| p * phi(v)).sum::<f64>().max(0.0)
}

/// `Σ μ log(μ/π)` on raw slices; `+∞` when `μ` charges a zero of `π`.
///
/// Evaluated through the density excess `μ/π − 1` so that values near `π` keep
/// their relative precision.
pub(crate) fn kl(mu: &[f64], pi: &[f64]) -> f64 {
    let mut h = Vec::with_capacity(mu.len());
    for (&m, &p) in mu.iter().zip(pi) {
        if p <= 0.0 {
            if m > 0.0 {
                return f64::INFINITY;
            }
            h.push(0.0);
        } else {
            h.push(m / p - 1.0);
        }
    }
    entropy_from_excess(&h, pi)
}

/// `H(μ|π) = Σ μ(x) log(μ(x)/π(x))`, with `0 log 0 = 0`.
pub fn relative_entropy(mu: &ProbabilityVector, pi: &ProbabilityVector) -> Result<f64> {
    ensure_same_space(mu.space(), pi.space())?;
    for (x, (&m, &p)) in mu.weights().iter().zip(pi.weights()).enumerate() {
        if m > 0.0 && p <= 0.0 {
            return Err(Error::SupportViolation(x));
        }
    }
    Ok(kl(mu.weights(), pi.weights()))
}

fn push(mu: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    let n = mu.len();
    let mut out = vec![0.0; n];
    for (x, &m) in mu.iter().enumerate() {
        if m != 0.0 {
            for (y, o) in out.iter_mut().enumerate() {
                *o += m * p[(x, y)];
            }
        }
    }
    out
}

/// `ℋ(μ) = H(μP|π) / H(μ|π)`.
pub fn contraction_ratio(mu: &ProbabilityVector, p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<f64> {
    ensure_same_space(mu.space(), p.space())?;
    let h0 = relative_entropy(mu, pi)?;
    if h0 < STATIONARITY_TOL {
        return Err(Error::AtStationarity);
    }
    let next = p.push_forward(mu)?;
    Ok(relative_entropy(&next, pi)? / h0)
}

/// Second largest eigenvalue of `PP⋆` on `L²(π)`.
///
/// With `A = D^{1/2} P D^{−1/2}` and `D = diag π`, the symmetrization of `PP⋆`
/// is `AAᵀ`, which is positive semidefinite with top eigenvalue 1.
pub fn lambda2_ppstar(p: &StochasticMatrix) -> Result<f64> {
    let pi = stationary_distribution(p)?;
    Ok(lambda2_with(p, pi.weights()))
}

fn lambda2_with(p: &StochasticMatrix, pi: &[f64]) -> f64 {
    let n = p.size();
    if n < 2 {
        return 0.0;
    }
    let a = DMatrix::from_fn(n, n, |x, y| (pi[x] / pi[y]).sqrt() * p.get(x, y));
    let m = &a * a.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let l2 = ev[1];
    if (-EIGEN_CLAMP_TOL..0.0).contains(&l2) {
        0.0
    } else if l2 > 1.0 && l2 <= 1.0 + EIGEN_CLAMP_TOL {
        1.0
    } else {
        l2
    }
}

/// Tuning of the multi-start ascent in [`estimate_alpha`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaOptions {
    /// Requested number of starts; all Dirac masses are always included.
    pub starts: usize,
    /// Tolerance on the first-order residual at the returned maximizer.
    pub tol: f64,
    /// Seed for the random Dirichlet starts.
    pub seed: u64,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            starts: 32,
            tol: 1e-6,
            seed: 0x5eed_a1fa,
        }
    }
}

/// Where the best value of `ℋ` was found.
#[derive(Clone, Debug, PartialEq)]
pub enum Maximizer {
    Measure(ProbabilityVector),
    /// The supremum is approached as `μ → π` and equals `λ₂(PP⋆)`.
    NearStationary,
}

/// Estimate of the optimal entropy contraction constant.
///
/// `alpha_hat` is an upper bound on `α` up to local maxima: the ascent can miss
/// the global supremum of `ℋ`, never overshoot it.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    pub best_ratio: f64,
    pub maximizer: Maximizer,
    pub lambda2: f64,
    pub n_starts: usize,
    /// `max_x |(P log P⋆f)(x) − ℋ log f(x)|` over the support of the maximizer.
    pub residual: f64,
    pub converged: bool,
}

struct Ascent<'a> {
    p: &'a DMatrix<f64>,
    pi: &'a [f64],
}

impl Ascent<'_> {
    fn ratio(&self, mu: &[f64]) -> Option<f64> {
        let h0 = kl(mu, self.pi);
        if !(h0 >= STATIONARITY_TOL) {
            return None;
        }
        // (μ − π)P carries the excess of μP without cancellation against π
        let delta: Vec<f64> = mu.iter().zip(self.pi).map(|(m, p)| m - p).collect();
        let moved = push(&delta, self.p);
        let h: Vec<f64> = moved.iter().zip(self.pi).map(|(d, p)| d / p).collect();
        Some(entropy_from_excess(&h, self.pi) / h0)
    }

    /// `(P log P⋆f)(x) − ℋ log f(x)` with `f = μ/π`.
    fn stationarity_terms(&self, mu: &[f64], ratio: f64) -> Vec<f64> {
        let n = mu.len();
        let nu = push(mu, self.p);
        let log_pf: Vec<f64> = (0..n).map(|y| (nu[y].max(MASS_FLOOR) / self.pi[y]).ln()).collect();
        (0..n)
            .map(|x| {
                let plog: f64 = (0..n).map(|y| self.p[(x, y)] * log_pf[y]).sum();
                plog - ratio * (mu[x].max(MASS_FLOOR) / self.pi[x]).ln()
            })
            .collect()
    }

    fn gradient(&self, mu: &[f64], ratio: f64) -> Vec<f64> {
        let h0 = kl(mu, self.pi);
        let mut g = self.stationarity_terms(mu, ratio);
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        for v in &mut g {
            *v = (*v - mean) / h0;
        }
        g
    }

    /// Projected gradient ascent with Armijo backtracking; returns the final point and value.
    fn run(&self, start: Vec<f64>) -> Option<(Vec<f64>, f64)> {
        let mut mu = start;
        let mut val = self.ratio(&mu)?;
        let mut step = 1.0;
        for _ in 0..MAX_ASCENT_STEPS {
            let g = self.gradient(&mu, val);
            if g.iter().any(|v| !v.is_finite()) {
                break;
            }
            let mut accepted = false;
            let mut eta = step * 4.0;
            for _ in 0..80 {
                let cand: Vec<f64> = mu.iter().zip(&g).map(|(m, d)| m + eta * d).collect();
                let cand = project_simplex(&cand);
                let gain: f64 = g.iter().zip(cand.iter().zip(&mu)).map(|(d, (c, m))| d * (c - m)).sum();
                if let Some(v) = self.ratio(&cand) {
                    if gain > 0.0 && v >= val + ARMIJO * gain {
                        let moved = cand.iter().zip(&mu).map(|(c, m)| (c - m).abs()).sum::<f64>();
                        mu = cand;
                        val = v;
                        step = eta;
                        accepted = moved > 1e-15;
                        break;
                    }
                }
                eta *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Some((mu, val))
    }

    /// Newton iterations for `ℋ` on the face spanned by the support of `mu`, in
    /// log-coordinates relative to the heaviest state.
    fn polish(&self, mu: &[f64], val: f64) -> (Vec<f64>, f64) {
        let mut mu: Vec<f64> = mu.iter().map(|&m| if m < SNAP_MASS { 0.0 } else { m }).collect();
        let total: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= total);
        let Some(mut val) = self.ratio(&mu) else {
            return (mu, val);
        };
        let support: Vec<usize> = (0..mu.len()).filter(|&x| mu[x] > 0.0).collect();
        if support.len() < 2 || support.len() > POLISH_MAX_FACE {
            return (mu, val);
        }
        let anchor = support.iter().copied().max_by(|&a, &b| mu[a].total_cmp(&mu[b])).unwrap_or(0);
        let free: Vec<usize> = support.iter().copied().filter(|&x| x != anchor).collect();
        let k = free.len();
        let len = mu.len();
        let to_mu = |theta: &[f64]| {
            let mut out = vec![0.0; len];
            let top = theta.iter().fold(0.0f64, |m, &t| m.max(t));
            out[anchor] = (-top).exp();
            for (j, &x) in free.iter().enumerate() {
                out[x] = (theta[j] - top).exp();
            }
            let s: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= s);
            out
        };
        let grad = |m: &[f64]| -> Option<Vec<f64>> {
            let r = self.ratio(m)?;
            let terms = self.stationarity_terms(m, r);
            let mean: f64 = support.iter().map(|&x| m[x] * terms[x]).sum();
            Some(free.iter().map(|&x| m[x] * (terms[x] - mean)).collect())
        };
        let mut theta: Vec<f64> = free.iter().map(|&x| (mu[x] / mu[anchor]).ln()).collect();
        for _ in 0..POLISH_STEPS {
            let Some(g) = grad(&mu) else { break };
            let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gnorm < 1e-15 {
                break;
            }
            let mut hess = DMatrix::zeros(k, k);
            let h = 1e-6;
            for j in 0..k {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                let (Some(gu), Some(gd)) = (grad(&to_mu(&up)), grad(&to_mu(&down))) else {
                    return (mu, val);
                };
                for i in 0..k {
                    hess[(i, j)] = (gu[i] - gd[i]) / (2.0 * h);
                }
            }
            let hess = (&hess + hess.transpose()) * 0.5;
            let eig = SymmetricEigen::new(hess.clone());
            let top = eig.eigenvalues.iter().fold(f64::MIN, |m, &v| m.max(v));
            let shift = if top >= 0.0 { top + 1e-8 + gnorm } else { 0.0 };
            let system = hess - DMatrix::identity(k, k) * shift;
            let Some(step) = system.lu().solve(&nalgebra::DVector::from_vec(g.clone())) else {
                break;
            };
            let mut eta = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t - eta * d).collect();
                let m = to_mu(&cand);
                if let Some(v) = self.ratio(&m) {
                    if v >= val - 1e-15 * val.abs().max(1.0) {
                        theta = cand;
                        mu = m;
                        val = v;
                        moved = true;
                        break;
                    }
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (mu, val)
    }
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

/// Estimates `α(P)` by multi-start projected gradient ascent of `ℋ` over the simplex,
/// with the near-`π` regime handled analytically through `λ₂(PP⋆)`.
pub fn estimate_alpha(p: &StochasticMatrix, opts: &AlphaOptions) -> Result<AlphaEstimate> {
    if opts.starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let pi = stationary_distribution(p)?;
    let n = p.size();
    let w = pi.weights();
    let lambda2 = lambda2_with(p, w);

    let mut starts: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut d = vec![0.0; n];
            d[x] = 1.0;
            d
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = opts.starts.saturating_sub(n).max(8);
    for _ in 0..random {
        let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = e.iter().sum();
        starts.push(e.into_iter().map(|v| v / s).collect());
    }
    let n_starts = starts.len();

    let ascent = Ascent { p: p.entries(), pi: w };
    let runs: Vec<(Vec<f64>, f64)> = starts
        .into_par_iter()
        .filter_map(|s| {
            let (mu, val) = ascent.run(s)?;
            // re-launch from the clipped face when the ascent stalls on the boundary
            if mu.iter().any(|&m| m < 1e-12) {
                let nudged: Vec<f64> = mu.iter().zip(w).map(|(m, q)| (1.0 - 1e-3) * m + 1e-3 * q).collect();
                if let Some((mu2, v2)) = ascent.run(nudged) {
                    if v2 > val {
                        return Some((mu2, v2));
                    }
                }
            }
            Some((mu, val))
        })
        .map(|(mu, val)| ascent.polish(&mu, val))
        .collect();

    let best = runs.into_iter().max_by(|a, b| a.1.total_cmp(&b.1));
    let (best_ratio, maximizer, residual) = match best {
        Some((mu, val)) if val >= lambda2 => {
            let terms = ascent.stationarity_terms(&mu, val);
            let residual = (0..n)
                .filter(|&x| mu[x] > 1e-12)
                .map(|x| terms[x].abs())
                .fold(0.0, f64::max);
            let pv = ProbabilityVector::from_trusted(p.space().clone(), mu.into());
            (val, Maximizer::Measure(pv), residual)
        }
        _ => (lambda2, Maximizer::NearStationary, 0.0),
    };
    Ok(AlphaEstimate {
        alpha_hat: 1.0 - best_ratio.max(lambda2),
        best_ratio,
        maximizer,
        lambda2,
        n_starts,
        residual,
        converged: residual <= opts.tol,
    })
}

/// Exact `H(μ₀P_t|π)` along a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evaluates `t ↦ H(μ₀ e^{tL} | π)` at each time.
pub fn entropy_decay_curve(l: &Generator, mu0: &ProbabilityVector, times: &[f64]) -> Result<EntropyCurve> {
    ensure_same_space(l.space(), mu0.space())?;
    check_times(times)?;
    let pi = generator_stationary(l)?;
    let values = times
        .par_iter()
        .map(|&t| {
            let pt = semigroup_at(l, t)?;
            Ok(kl(&push(mu0.weights(), pt.entries()), pi.weights()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EntropyCurve {
        times: times.to_vec(),
        values,
    })
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::NonFiniteTime(t));
        }
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be sorted".into()));
    }
    Ok(())
}

/// Checks that `π` is stationary for `P` and returns `P⋆`; shared by callers needing both.
pub fn adjoint_of(p: &StochasticMatrix) -> Result<(ProbabilityVector, StochasticMatrix)> {
    let pi = stationary_distribution(p)?;
    let star = adjoint(p, &pi)?;
    Ok((pi, star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::StateSpace;

    fn two_state(a: f64, b: f64) -> StochasticMatrix {
        let s = StateSpace::indexed(2).unwrap();
        StochasticMatrix::from_rows(s, &[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let s = StateSpace::indexed(2).unwrap();
        let pi = ProbabilityVector::uniform(s.clone());
        assert_eq!(relative_entropy(&pi, &pi).unwrap(), 0.0);
        let d = ProbabilityVector::dirac(s.clone(), 0).unwrap();
        assert!((relative_entropy(&d, &pi).unwrap() - 2f64.ln()).abs() < 1e-15);
        let mu = ProbabilityVector::new(s.clone(), vec![0.9, 0.1]).unwrap();
        let direct = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        assert!((relative_entropy(&mu, &pi).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.368).abs() < 1e-3);
        let degenerate = ProbabilityVector::dirac(s, 1).unwrap();
        assert_eq!(relative_entropy(&mu, &degenerate), Err(Error::SupportViolation(0)));
    }

    #[test]
    fn contraction_ratio_examples() {
        let s = StateSpace::indexed(2).unwrap();
        let pi = ProbabilityVector::uniform(s.clone());
        let d = ProbabilityVector::dirac(s.clone(), 0).unwrap();
        let p = two_state(0.25, 0.25);
        let r = contraction_ratio(&d, &p, &pi).unwrap();
        let expected = (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln()) / 2f64.ln();
        assert!((r - expected).abs() < 1e-14);
        assert!((r - 0.1887).abs() < 1e-4);
        let id = StochasticMatrix::identity(s.clone());
        assert!((contraction_ratio(&d, &id, &pi).unwrap() - 1.0).abs() < 1e-15);
        let rank_one = two_state(0.5, 0.5);
        assert_eq!(contraction_ratio(&d, &rank_one, &pi).unwrap(), 0.0);
        assert_eq!(contraction_ratio(&pi, &p, &pi), Err(Error::AtStationarity));
    }

    #[test]
    fn lambda2_examples() {
        for &p in &[0.1, 0.25, 0.4, 0.9] {
            let l2 = lambda2_ppstar(&two_state(p, p)).unwrap();
            let want = (1.0 - 2.0 * p) * (1.0 - 2.0 * p);
            assert!((l2 - want).abs() < 1e-12, "p={p}");
        }
        let s = StateSpace::indexed(3).unwrap();
        let rank_one = StochasticMatrix::from_rows(s, &vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        assert!(lambda2_ppstar(&rank_one).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alpha_examples() {
        let s = StateSpace::indexed(3).unwrap();
        let rank_one = StochasticMatrix::from_rows(s, &vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        let est = estimate_alpha(&rank_one, &AlphaOptions::default()).unwrap();
        assert!((est.alpha_hat - 1.0).abs() < 1e-12);

        // grid oracle over μ = (u, 1−u)
        let p = two_state(0.25, 0.25);
        let pi = ProbabilityVector::uniform(StateSpace::indexed(2).unwrap());
        let mut best: f64 = 0.0;
        for k in 0..=1000 {
            let u = k as f64 / 1000.0;
            let mu = ProbabilityVector::new(pi.space().clone(), vec![u, 1.0 - u]).unwrap();
            if let Ok(r) = contraction_ratio(&mu, &p, &pi) {
                best = best.max(r);
            }
        }
        let est = estimate_alpha(&p, &AlphaOptions::default()).unwrap();
        assert!((est.alpha_hat - (1.0 - best)).abs() < 1e-4);
        assert!(est.alpha_hat <= 1.0);
    }

    #[test]
    fn identity_has_zero_alpha() {
        let s = StateSpace::indexed(3).unwrap();
        // P = I is reducible; its α is read off the ratio directly
        let id = StochasticMatrix::identity(s.clone());
        let pi = ProbabilityVector::uniform(s.clone());
        let mu = ProbabilityVector::new(s, vec![0.5, 0.3, 0.2]).unwrap();
        assert_eq!(contraction_ratio(&mu, &id, &pi).unwrap(), 1.0);
        assert_eq!(estimate_alpha(&id, &AlphaOptions::default()), Err(Error::NotIrreducible));
    }

    #[test]
    fn simplex_projection() {
        let w = project_simplex(&[0.5, 0.8, -0.2]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[0] - 0.35).abs() < 1e-15 && (w[1] - 0.65).abs() < 1e-15 && w[2] == 0.0);
    }

    #[test]
    fn entropy_curve_rank_one_closed_form() {
        let s = StateSpace::indexed(3).unwrap();
        let pi_w = [0.2, 0.3, 0.5];
        let p = StochasticMatrix::from_rows(s.clone(), &vec![pi_w.to_vec(); 3]).unwrap();
        let l = Generator::from_kernel(&p);
        let mu0 = ProbabilityVector::dirac(s.clone(), 0).unwrap();
        let times = [0.0, 0.3, 1.0, 2.5];
        let curve = entropy_decay_curve(&l, &mu0, &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let e = (-t as f64).exp();
            let mu_t: Vec<f64> = (0..3).map(|y| (1.0 - e) * pi_w[y] + e * mu0.get(y)).collect();
            assert!((curve.values[i] - kl(&mu_t, &pi_w)).abs() < 1e-10);
        }
        let pi = ProbabilityVector::new(s, pi_w.to_vec()).unwrap();
        assert!(entropy_decay_curve(&l, &pi, &times).unwrap().values.iter().all(|v| v.abs() < 1e-14));
    }
}
