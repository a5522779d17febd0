mod common;

use common::*;
use curvlab::bounds::dbar;
use curvlab::chain::{adjoint, generator_adjoint, generator_stationary, perturb, semigroup_at, stationary_distribution, Generator, ProbabilityVector};
use curvlab::entropy::{contraction_ratio, estimate_alpha, AlphaOptions, Maximizer};
use curvlab::metric::{closure_from_pairs, combinatorial_distance, verify_generating, GeneratingSet, MetricSpace};
use curvlab::transport::{
    lipschitz, ollivier_curvature, ollivier_curvature_all_pairs, sectional_feasible, wasserstein, wasserstein_value,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance() -> impl Strategy<Value = (usize, ChaCha8Rng)> {
    (2usize..=6, any::<u64>()).prop_map(|(n, seed)| (n, ChaCha8Rng::seed_from_u64(seed)))
}

fn measure(r: &mut ChaCha8Rng, n: usize) -> ProbabilityVector {
    ProbabilityVector::normalized(space(n), random_measure(r, &vec![1.0 / n as f64; n])).unwrap()
}

fn check_coupling(joint: &nalgebra::DMatrix<f64>, a: &[f64], b: &[f64]) -> Result<(), TestCaseError> {
    let n = a.len();
    for x in 0..n {
        prop_assert!((joint.row(x).sum() - a[x]).abs() < 1e-9);
        prop_assert!((joint.column(x).sum() - b[x]).abs() < 1e-9);
    }
    prop_assert!(joint.iter().all(|&v| v >= 0.0));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_is_an_involution((n, mut r) in (2usize..=8, any::<u64>()).prop_map(|(n, s)| (n, ChaCha8Rng::seed_from_u64(s)))) {
        let p = random_kernel(&mut r, n);
        let pi = stationary_distribution(&p).unwrap();
        let star = adjoint(&p, &pi).unwrap();
        let back = adjoint(&star, &pi).unwrap();
        prop_assert!(back.max_abs_diff(&p) < 1e-10);
    }

    #[test]
    fn chapman_kolmogorov((n, mut r) in instance(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let l = random_generator(&mut r, n);
        let lhs = semigroup_at(&l, s + t).unwrap();
        let rhs = semigroup_at(&l, s).unwrap().compose(&semigroup_at(&l, t).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn semigroup_adjoint_commutes((n, mut r) in instance(), t in 0.0f64..4.0) {
        let l = random_generator(&mut r, n);
        let pi = generator_stationary(&l).unwrap();
        let star_gen = generator_adjoint(&l, &pi).unwrap();
        let lhs = adjoint(&semigroup_at(&l, t).unwrap(), &pi).unwrap();
        let rhs = semigroup_at(&star_gen, t).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn perturbation_keeps_curvature((n, mut r) in instance()) {
        let p = random_kernel(&mut r, n);
        let (d, s) = random_metric(&mut r, n);
        let pi = stationary_distribution(&p).unwrap();
        let kappa = ollivier_curvature(&p, &d, &s).unwrap().kappa;
        for eps in [0.1, 0.5] {
            let pe = perturb(&p, &pi, eps).unwrap();
            prop_assert!(ollivier_curvature(&pe, &d, &s).unwrap().kappa >= kappa - 1e-9);
        }
    }

    #[test]
    fn closure_is_a_generated_metric((n, mut r) in instance()) {
        let (d, s) = random_metric(&mut r, n);
        prop_assert!(MetricSpace::new(space(n), d.matrix().clone()).is_ok());
        let plain = GeneratingSet::new(s.pairs().to_vec()).unwrap();
        prop_assert!(verify_generating(&d, &plain));
        prop_assert!(verify_generating(&d, &s));
    }

    #[test]
    fn combinatorial_matches_unit_closure((n, mut r) in instance()) {
        let p = random_kernel(&mut r, n);
        let d = combinatorial_distance(&p).unwrap();
        let edges: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
            .filter(|&(x, y)| p.get(x, y) > 0.0 || p.get(y, x) > 0.0)
            .map(|(x, y)| (x, y, 1.0))
            .collect();
        let (c, _) = closure_from_pairs(space(n), &edges).unwrap();
        prop_assert_eq!(d.matrix(), c.matrix());
    }

    #[test]
    fn curvature_on_generating_set_equals_all_pairs((n, mut r) in instance()) {
        let p = random_kernel(&mut r, n);
        let (d, s) = random_metric(&mut r, n);
        let on_s = ollivier_curvature(&p, &d, &s).unwrap().kappa;
        let all = ollivier_curvature_all_pairs(&p, &d).unwrap().kappa;
        prop_assert!((on_s - all).abs() < 1e-9, "{} vs {}", on_s, all);
    }

    #[test]
    fn wasserstein_plans_and_triangle((n, mut r) in instance()) {
        let (d, _) = random_metric(&mut r, n);
        let (a, b, c) = (measure(&mut r, n), measure(&mut r, n), measure(&mut r, n));
        let sol = wasserstein(&a, &b, &d).unwrap();
        check_coupling(sol.plan.joint(), a.weights(), b.weights())?;
        prop_assert!((sol.plan.expected_distance(&d) - sol.value).abs() < 1e-9);
        prop_assert!((sol.dual_value() - sol.value).abs() < 1e-9);
        prop_assert!(sol.min_reduced_cost > -1e-9);
        let ab = sol.value;
        let bc = wasserstein_value(b.weights(), c.weights(), &d).unwrap();
        let ac = wasserstein_value(a.weights(), c.weights(), &d).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        // Kantorovich–Rubinstein: any 1-Lipschitz function is a lower bound
        let f: Vec<f64> = (0..n).map(|x| d.dist(0, x)).collect();
        let gap: f64 = a.weights().iter().zip(b.weights()).zip(&f).map(|((p, q), v)| (p - q) * v).sum();
        prop_assert!(gap.abs() <= ab + 1e-9);
    }

    #[test]
    fn sectional_witnesses_are_couplings((n, mut r) in instance()) {
        let p = random_kernel(&mut r, n);
        let (d, s) = random_metric(&mut r, n);
        let pi = stationary_distribution(&p).unwrap();
        let star = adjoint(&p, &pi).unwrap();
        let cert = sectional_feasible(&star, &d, &s).unwrap();
        prop_assert_eq!(cert.holds, cert.failing.is_empty());
        for (&(x, y), c) in &cert.witnesses {
            let rx: Vec<f64> = star.entries().row(x).iter().copied().collect();
            let ry: Vec<f64> = star.entries().row(y).iter().copied().collect();
            check_coupling(c.joint(), &rx, &ry)?;
            prop_assert!(c.max_support_distance(&d) <= d.dist(x, y) + 1e-9);
        }
    }

    #[test]
    fn dual_lipschitz_bounds((n, mut r) in instance(), f in prop::collection::vec(-2.0f64..2.0, 6)) {
        let f = &f[..n];
        let p = random_kernel(&mut r, n);
        let (d, s) = random_metric(&mut r, n);
        let kappa = ollivier_curvature_all_pairs(&p, &d).unwrap().kappa;
        let pf = p.apply(f).unwrap();
        prop_assert!(lipschitz(&pf, &d) <= (1.0 - kappa) * lipschitz(f, &d) + 1e-9);
        let pi = stationary_distribution(&p).unwrap();
        let star = adjoint(&p, &pi).unwrap();
        if sectional_feasible(&star, &d, &s).unwrap().holds {
            let g: Vec<f64> = f.iter().map(|v| v.exp()).collect();
            let log_sg: Vec<f64> = star.apply(&g).unwrap().iter().map(|v| v.ln()).collect();
            prop_assert!(lipschitz(&log_sg, &d) <= lipschitz(f, &d) + 1e-9);
        }
    }

    #[test]
    fn entropy_never_increases((n, mut r) in instance()) {
        let p = random_kernel(&mut r, n);
        let pi = stationary_distribution(&p).unwrap();
        for _ in 0..50 {
            let mu = measure(&mut r, n);
            if let Ok(h) = contraction_ratio(&mu, &p, &pi) {
                prop_assert!(h <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn alpha_first_order_condition((n, mut r) in instance()) {
        let p = random_kernel(&mut r, n);
        let opts = AlphaOptions { starts: 16, ..AlphaOptions::default() };
        let est = estimate_alpha(&p, &opts).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        let w = pi.weights();
        prop_assert!(est.alpha_hat <= 1.0 - est.lambda2 + 1e-12);
        if let Maximizer::Measure(mu) = &est.maximizer {
            let m = mu.weights();
            prop_assert!((contraction_ratio(mu, &p, &pi).unwrap() - est.best_ratio).abs() < 1e-9);
            if m.iter().all(|&v| v > 1e-9) {
                let f: Vec<f64> = m.iter().zip(w).map(|(a, b)| a / b).collect();
                let star = adjoint(&p, &pi).unwrap();
                let log_sf: Vec<f64> = star.apply(&f).unwrap().iter().map(|v| v.ln()).collect();
                let lhs = p.apply(&log_sf).unwrap();
                let residual = (0..n)
                    .map(|x| (lhs[x] - est.best_ratio * f[x].ln()).abs())
                    .fold(0.0, f64::max);
                prop_assert!((residual - est.residual).abs() < 1e-8);
                prop_assert!(residual <= opts.tol, "residual {}", residual);
            }
        }
    }

    #[test]
    fn dbar_is_submultiplicative((n, mut r) in instance(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let l = random_generator(&mut r, n);
        prop_assert!(dbar(&l, s + t).unwrap() <= dbar(&l, s).unwrap() * dbar(&l, t).unwrap() + 1e-9);
    }

    #[test]
    fn time_varying_contraction((n, mut r) in instance(), t in 0.05f64..3.0) {
        let l: Generator = random_generator(&mut r, n);
        let (d, s) = random_metric(&mut r, n);
        let pi = generator_stationary(&l).unwrap();
        let pt = semigroup_at(&l, t).unwrap();
        let star = adjoint(&pt, &pi).unwrap();
        if sectional_feasible(&star, &d, &s).unwrap().holds {
            let kappa = ollivier_curvature(&pt, &d, &s).unwrap().kappa;
            for _ in 0..200 {
                let mu = random_measure(&mut r, pi.weights());
                let h0 = kl(&mu, pi.weights());
                let h1 = kl(&push(&mu, pt.entries()), pi.weights());
                prop_assert!(h1 <= (1.0 - kappa) * h0 + 1e-9);
            }
        }
    }
}
