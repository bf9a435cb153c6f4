mod common;

use eic_core::acquisition::{
    decision_threshold, ei_value, evaluation_cost, expected_shortfall, threshold_function, ts_draw,
};
use eic_core::{AcquisitionContext, GpPosterior, KernelSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn ei_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, se) = common::mc_normal(0.0, 0.8, 200_000, &mut rng, |f| (f - 0.3).max(0.0));
    let ei = ei_value(0.0, 0.8, 0.3);
    assert!((ei - m).abs() <= 3.0 * se, "ei {ei} vs mc {m} ± {se}");
}

#[test]
fn cost_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ctx = AcquisitionContext::new(0.1, 150, 100, 1.0).unwrap();
    let (m, se) = common::mc_normal(-0.2, 0.5, 200_000, &mut rng, |f| (0.1 - f).max(0.0) / 50.0);
    let c = evaluation_cost(-0.2, 0.5, &ctx).unwrap();
    assert!((c - m).abs() <= 3.0 * se, "cost {c} vs mc {m} ± {se}");
}

/// Three correlated candidates: the draw frequencies must match sampling the
/// same Gaussian directly.
#[test]
fn thompson_frequencies_match_the_gaussian() {
    let spec = KernelSpec::isotropic(1.0, 0.3, 1).unwrap();
    let post = GpPosterior::fit_rows(&[vec![0.2], vec![0.8]], &[0.5, 0.2], 0.04, &spec).unwrap();
    let cands = vec![vec![0.1], vec![0.5], vec![0.9]];

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 3];
    for _ in 0..10_000 {
        counts[ts_draw(&post, &cands, &mut rng).unwrap()] += 1;
    }

    let (mean, cov) = post.joint(&cands).unwrap();
    let l = (cov + DMatrix::identity(3, 3) * 1e-12).cholesky().unwrap().l();
    let mut oracle = [0usize; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 200_000;
    for _ in 0..draws {
        let z = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
        let s = &mean + &l * z;
        oracle[s.argmax().0] += 1;
    }
    for k in 0..3 {
        let a = counts[k] as f64 / 10_000.0;
        let b = oracle[k] as f64 / draws as f64;
        assert!((a - b).abs() <= 0.02, "candidate {k}: {a} vs {b}");
    }
}

/// The exact rule "EI ≥ shortfall/(N−n)" switches at the threshold root for N − n.
#[test]
fn exact_rule_crossover_is_the_root_for_the_remaining_budget() {
    for (budget, n) in [(100usize, 10usize), (416, 16), (1000, 500), (10_000, 3)] {
        let sd = 0.7;
        let xi = 1.3;
        let ctx = AcquisitionContext::new(xi, budget, n, 1.0).unwrap();
        let gap = |mu: f64| ei_value(mu, sd, xi) - evaluation_cost(mu, sd, &ctx).unwrap();
        // Bisection on μ for α − L = 0.
        let (mut lo, mut hi) = (xi - 12.0 * sd, xi);
        assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let z_cross = (0.5 * (lo + hi) - xi) / sd;
        // N − n plays the role of N in g.
        let z_star = decision_threshold(budget - n).unwrap();
        assert!((z_cross - z_star).abs() < 1e-8, "N={budget} n={n}: {z_cross} vs {z_star}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// EI ≥ shortfall/N is the same event as z ≥ z*(N), away from the root.
    #[test]
    fn shortfall_over_budget_matches_the_threshold(
        sd in 0.01f64..10.0,
        xi in -5.0f64..5.0,
        budget in 3usize..100_000,
        offset in 1e-4f64..3.0,
    ) {
        let z_star = decision_threshold(budget).unwrap();
        let rule = |z: f64| {
            let mu = xi + z * sd;
            ei_value(mu, sd, xi) >= expected_shortfall(mu, sd, xi) / budget as f64
        };
        prop_assert!(rule(z_star + offset));
        prop_assert!(!rule(z_star - offset));
        prop_assert!(threshold_function(z_star + offset, budget) > 0.0);
    }

    /// EI − (N−n)·cost = μ − ξ.
    #[test]
    fn improvement_cost_identity(
        mu in -20.0f64..20.0,
        sd in 0.0f64..20.0,
        xi in -20.0f64..20.0,
        n in 0usize..99,
    ) {
        let ctx = AcquisitionContext::new(xi, 100, n, 1.0).unwrap();
        let lhs = ei_value(mu, sd, xi) - (100 - n) as f64 * evaluation_cost(mu, sd, &ctx).unwrap();
        prop_assert!((lhs - (mu - xi)).abs() <= 1e-10 * (1.0 + mu.abs() + xi.abs() + sd));
    }
}
