//! Acquisition functions and the bookkeeping they read from.
//!
//! EI and the evaluation cost are the two halves of one expectation:
//! E[(f−ξ)⁺] − E[(ξ−f)⁺] = μ − ξ for f ~ N(μ, σ²). The cost divides the
//! shortfall by the number of remaining evaluations, so it grows as the
//! budget runs out.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{factorize_with_jitter, GpPosterior};
use crate::normal;
use crate::optim::{self, NelderMeadOptions};

/// Replication counts and running means for every distinct evaluated point.
#[derive(Debug, Clone, Default)]
pub struct ObservationLedger {
    dim: usize,
    points: Vec<Vec<f64>>,
    counts: Vec<u32>,
    sums: Vec<f64>,
    total: usize,
}

impl ObservationLedger {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    /// Adds one observation; points match existing rows only on exact equality.
    /// Returns the row index the observation was filed under.
    pub fn record(&mut self, x: &[f64], y: f64) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "ledger holds {}-d points, got {}",
                self.dim,
                x.len()
            )));
        }
        self.total += 1;
        if let Some(i) = self.points.iter().position(|p| p.as_slice() == x) {
            self.counts[i] += 1;
            self.sums[i] += y;
            return Ok(i);
        }
        self.points.push(x.to_vec());
        self.counts.push(1);
        self.sums.push(y);
        Ok(self.points.len() - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct points, M_n.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn unique_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn rep_counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn sample_mean(&self, i: usize) -> f64 {
        self.sums[i] / f64::from(self.counts[i])
    }

    pub fn sample_means(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.sample_mean(i)).collect()
    }

    /// n = Σ tᵢ.
    pub fn total_observations(&self) -> usize {
        self.total
    }

    /// Row with the largest sample mean (lowest index on ties).
    pub fn best_sample_mean(&self) -> Option<usize> {
        argmax((0..self.len()).map(|i| self.sample_mean(i)))
    }
}

/// Index of the largest value, lowest index winning ties. NaNs are skipped.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Incumbent ξₙ and the EIC decision's budget position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionContext {
    pub incumbent: f64,
    pub budget: usize,
    pub iteration: usize,
    pub confidence_b: f64,
}

impl AcquisitionContext {
    pub fn new(incumbent: f64, budget: usize, iteration: usize, confidence_b: f64) -> Result<Self> {
        let ctx = Self {
            incumbent,
            budget,
            iteration,
            confidence_b,
        };
        ctx.remaining()?;
        Ok(ctx)
    }

    /// N − n, which must be positive.
    pub fn remaining(&self) -> Result<usize> {
        if self.iteration >= self.budget {
            return Err(Error::InvalidState(format!(
                "iteration {} has no remaining budget (N = {})",
                self.iteration, self.budget
            )));
        }
        Ok(self.budget - self.iteration)
    }
}

/// The optimistic incumbent and the ledger row attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incumbent {
    pub value: f64,
    pub index: usize,
}

/// max over rows of ȳᵢ + b·σ/√tᵢ.
pub fn incumbent_value(ledger: &ObservationLedger, b: f64, noise_sd: f64) -> Result<Incumbent> {
    let ucb = |i: usize| ledger.sample_mean(i) + b * noise_sd / f64::from(ledger.counts[i]).sqrt();
    argmax((0..ledger.len()).map(ucb))
        .map(|index| Incumbent {
            value: ucb(index),
            index,
        })
        .ok_or_else(|| Error::InvalidState("incumbent of an empty ledger".into()))
}

/// Default confidence parameter: log log N, floored at 0.5 for small budgets.
pub fn default_confidence_b(budget: usize) -> f64 {
    let n = budget.max(2) as f64;
    let b = n.ln().ln();
    if b.is_finite() {
        b.max(0.5)
    } else {
        0.5
    }
}

/// E[(f − ξ)⁺] for f ~ N(mean, sd²).
pub fn ei_value(mean: f64, sd: f64, incumbent: f64) -> f64 {
    let gap = mean - incumbent;
    if sd <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * normal::cdf(z) + sd * normal::pdf(z)).max(0.0)
}

/// E[(ξ − f)⁺] for f ~ N(mean, sd²).
pub fn expected_shortfall(mean: f64, sd: f64, incumbent: f64) -> f64 {
    ei_value(-mean, sd, -incumbent)
}

/// E[(ξ − f)⁺] / (N − n).
pub fn evaluation_cost(mean: f64, sd: f64, ctx: &AcquisitionContext) -> Result<f64> {
    let remaining = ctx.remaining()?;
    Ok(expected_shortfall(mean, sd, ctx.incumbent) / remaining as f64)
}

/// g(z) = (N−1)·(zΦ(z) + φ(z)) + z, increasing in z.
pub fn threshold_function(z: f64, budget: usize) -> f64 {
    let m = budget as f64 - 1.0;
    m * (z * normal::cdf(z) + normal::pdf(z)) + z
}

/// The negative root z* of [`threshold_function`]: EI beats the
/// (N-normalized) cost exactly when the standardized gap (μ−ξ)/σ is ≥ z*.
pub fn decision_threshold(budget: usize) -> Result<f64> {
    if budget < 3 {
        return Err(Error::invalid(format!("threshold needs N >= 3, got {budget}")));
    }
    let mut hi = 0.0;
    let mut lo = -10.0 * (budget as f64).ln().sqrt();
    while threshold_function(lo, budget) >= 0.0 {
        lo *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if threshold_function(mid, budget) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Large-N expansion of the root: −√(2 log N′) + 3(log log N′ + log 2)/(2√(2 log N′)),
/// with N′ = (N−1)/√(2π).
pub fn threshold_approximation(budget: usize) -> f64 {
    let n_prime = (budget as f64 - 1.0) / (2.0 * std::f64::consts::PI).sqrt();
    let l = n_prime.ln();
    let r = (2.0 * l).sqrt();
    -r + 3.0 * (l.ln() + std::f64::consts::LN_2) / (2.0 * r)
}

/// μ + √β·σ.
pub fn ucb_value(mean: f64, sd: f64, beta: f64) -> f64 {
    mean + beta.max(0.0).sqrt() * sd
}

/// βₙ = 2 log(π²n²/(6δ)).
pub fn ucb_beta(iteration: usize, delta: f64) -> f64 {
    let n = iteration.max(1) as f64;
    2.0 * (std::f64::consts::PI.powi(2) * n * n / (6.0 * delta)).ln()
}

/// Draws one joint posterior sample over `candidates` and returns its argmax.
pub fn ts_draw<R: Rng + ?Sized>(
    model: &GpPosterior,
    candidates: &[Vec<f64>],
    rng: &mut R,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::invalid("Thompson draw over an empty candidate set"));
    }
    if candidates.len() == 1 {
        return Ok(0);
    }
    let (mean, cov) = model.joint(candidates)?;
    let (chol, _) = factorize_with_jitter(cov, model.kernel().tau_sq(), "Thompson covariance")?;
    let z = nalgebra::DVector::from_fn(candidates.len(), |_, _| {
        StandardNormal.sample(&mut *rng)
    });
    let sample = mean + chol.l_dirty().lower_triangle() * z;
    argmax(sample.iter().copied()).ok_or_else(|| Error::InvalidState("non-finite posterior sample".into()))
}

/// Work budget of the inner maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchEffort {
    /// Uniform random screening points.
    pub n_candidates: usize,
    /// Best screening points refined by Nelder-Mead.
    pub n_starts: usize,
    /// Nelder-Mead iterations per refinement.
    pub max_iter: usize,
}

impl Default for SearchEffort {
    fn default() -> Self {
        Self {
            n_candidates: 1000,
            n_starts: 5,
            max_iter: 200,
        }
    }
}

/// Result of [`maximize_acquisition`].
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Distinct evaluated points in decreasing score order, starting with `point`.
    pub ranked: Vec<(Vec<f64>, f64)>,
}

/// How many ranked points a search keeps for callers.
const RANKED_KEEP: usize = 64;

/// Maximizes `score` over `[0,1]^dim`: screens uniform candidates plus
/// `extra_points`, then refines the best few with box-clamped Nelder-Mead.
pub fn maximize_acquisition<F, R>(
    score: F,
    dim: usize,
    rng: &mut R,
    effort: &SearchEffort,
    extra_points: &[Vec<f64>],
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if dim == 0 {
        return Err(Error::invalid("search dimension must be positive"));
    }
    let mut evaluated: Vec<(Vec<f64>, f64)> =
        Vec::with_capacity(effort.n_candidates + extra_points.len() + effort.n_starts);
    for _ in 0..effort.n_candidates {
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let v = score(&x);
        evaluated.push((x, v));
    }
    for x in extra_points {
        let v = score(x);
        evaluated.push((x.clone(), v));
    }
    evaluated.retain(|(_, v)| v.is_finite());
    if evaluated.is_empty() {
        return Err(Error::InvalidState("no finite acquisition value among candidates".into()));
    }
    // Stable: equal scores keep screening order.
    evaluated.sort_by(|a, b| b.1.total_cmp(&a.1));

    let opts = NelderMeadOptions {
        max_iter: effort.max_iter,
        initial_step: 0.05,
        f_tol: 1e-12,
        x_tol: 1e-7,
    };
    let lower = vec![0.0; dim];
    let upper = vec![1.0; dim];
    let mut refined = Vec::with_capacity(effort.n_starts);
    for (start, _) in evaluated.iter().take(effort.n_starts) {
        let m = optim::minimize(|x| -score(x), start, &lower, &upper, &opts);
        let v = -m.value;
        if v.is_finite() {
            refined.push((m.x, v));
        }
    }

    refined.extend(evaluated);
    refined.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut ranked: Vec<(Vec<f64>, f64)> = Vec::with_capacity(RANKED_KEEP);
    for (x, v) in refined {
        if ranked.len() == RANKED_KEEP {
            break;
        }
        if !ranked.iter().any(|(p, _)| *p == x) {
            ranked.push((x, v));
        }
    }
    let (point, value) = ranked[0].clone();
    Ok(SearchResult {
        point,
        value,
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelSpec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(incumbent: f64, budget: usize, iteration: usize) -> AcquisitionContext {
        AcquisitionContext::new(incumbent, budget, iteration, 1.0).unwrap()
    }

    #[test]
    fn ledger_bookkeeping() {
        let mut l = ObservationLedger::new(2);
        assert_eq!(l.record(&[0.1, 0.2], 1.0).unwrap(), 0);
        assert_eq!(l.record(&[0.3, 0.2], 5.0).unwrap(), 1);
        assert_eq!(l.record(&[0.1, 0.2], 2.0).unwrap(), 0);
        assert_eq!(l.len(), 2);
        assert_eq!(l.total_observations(), 3);
        assert_eq!(l.rep_counts(), &[2, 1]);
        assert_eq!(l.sample_mean(0), 1.5);
        assert_eq!(l.best_sample_mean(), Some(1));
        assert!(l.record(&[0.1], 0.0).is_err());
    }

    #[test]
    fn incumbent_single_point() {
        let mut l = ObservationLedger::new(1);
        for _ in 0..4 {
            l.record(&[0.5], 1.0).unwrap();
        }
        let inc = incumbent_value(&l, 2.0, 0.5).unwrap();
        assert_eq!(inc.value, 1.5);
        assert_eq!(inc.index, 0);
    }

    #[test]
    fn incumbent_with_zero_b_is_best_mean() {
        let mut l = ObservationLedger::new(1);
        l.record(&[0.1], 0.3).unwrap();
        l.record(&[0.2], 0.9).unwrap();
        l.record(&[0.3], -0.4).unwrap();
        let inc = incumbent_value(&l, 0.0, 0.1).unwrap();
        assert_eq!((inc.value, inc.index), (0.9, 1));
    }

    #[test]
    fn incumbent_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = ObservationLedger::new(1);
        let pts: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        for _ in 0..40 {
            let p = pts[rng.random_range(0..10)];
            l.record(&[p], rng.random::<f64>() * 2.0 - 1.0).unwrap();
        }
        let (b, s) = (1.3, 0.2);
        let mut best = f64::NEG_INFINITY;
        for i in 0..l.len() {
            let u = l.sums[i] / l.counts[i] as f64 + b * s / (l.counts[i] as f64).sqrt();
            best = best.max(u);
        }
        assert_eq!(incumbent_value(&l, b, s).unwrap().value, best);
        assert!(matches!(
            incumbent_value(&ObservationLedger::new(1), b, s),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn ei_closed_forms() {
        assert!((ei_value(0.4, 1.0, 0.4) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(ei_value(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(ei_value(2.0, 0.0, 0.5), 1.5);
    }

    #[test]
    fn cost_closed_forms() {
        let c = evaluation_cost(0.7, 1.0, &ctx(0.7, 150, 50)).unwrap();
        assert!((c - 0.003_989_422_804_014_327).abs() < 1e-15);
        assert_eq!(evaluation_cost(5.0, 0.0, &ctx(0.0, 10, 2)).unwrap(), 0.0);
        let bad = AcquisitionContext {
            incumbent: 0.0,
            budget: 10,
            iteration: 10,
            confidence_b: 1.0,
        };
        assert!(matches!(evaluation_cost(0.0, 1.0, &bad), Err(Error::InvalidState(_))));
        assert!(AcquisitionContext::new(0.0, 5, 7, 1.0).is_err());
    }

    #[test]
    fn default_b() {
        assert!((default_confidence_b(10) - 0.834_032_445_247_956).abs() < 1e-12);
        assert_eq!(default_confidence_b(3), 0.5);
        assert!((default_confidence_b(416) - 416f64.ln().ln()).abs() < 1e-15);
    }

    #[test]
    fn threshold_root_and_bracket() {
        for n in [3usize, 10, 100, 1000, 10_000, 1_000_000] {
            let z = decision_threshold(n).unwrap();
            assert!(z < 0.0);
            assert!(threshold_function(z, n).abs() <= 1e-8);
            assert!(threshold_function(0.0, n) > 0.0);
            assert!(threshold_function(-10.0 * (n as f64).ln().sqrt(), n) < 0.0);
        }
        assert!(decision_threshold(2).is_err());
    }

    #[test]
    fn threshold_expansion_at_ten_thousand() {
        let z = decision_threshold(10_000).unwrap();
        let approx = threshold_approximation(10_000);
        assert!((z - approx).abs() <= 0.15, "{z} vs {approx}");
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb_value(0.3, 2.0, 0.0), 0.3);
        assert_eq!(ucb_value(0.0, 1.0, 4.0), 2.0);
        assert!(ucb_beta(100, 0.1) > ucb_beta(10, 0.1));
        assert!((ucb_beta(10, 0.1) - 2.0 * (std::f64::consts::PI.powi(2) * 100.0 / 0.6).ln()).abs() < 1e-12);
    }

    #[test]
    fn ts_single_candidate_and_degenerate_posterior() {
        let spec = KernelSpec::isotropic(1.0, 0.3, 1).unwrap();
        let gp = GpPosterior::fit_rows(&[vec![0.5]], &[1.0], 0.01, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ts_draw(&gp, &[vec![0.2]], &mut rng).unwrap(), 0);
        assert!(ts_draw(&gp, &[], &mut rng).is_err());

        // Many noise-free replications pin the posterior down.
        let xs: Vec<Vec<f64>> = vec![vec![0.1], vec![0.5], vec![0.9]];
        let gp = GpPosterior::fit_rows(&xs, &[0.0, 2.0, 1.0], 0.0, &spec).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(ts_draw(&gp, &xs, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn maximizer_interior_constant_and_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let effort = SearchEffort::default();
        let bowl = |x: &[f64]| -((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2));
        let r = maximize_acquisition(bowl, 2, &mut rng, &effort, &[]).unwrap();
        assert!(r.point.iter().all(|v| (v - 0.5).abs() < 0.02), "{:?}", r.point);

        let r = maximize_acquisition(|_: &[f64]| 3.25, 2, &mut rng, &effort, &[]).unwrap();
        assert_eq!(r.value, 3.25);

        let ramp = |x: &[f64]| x.iter().sum::<f64>();
        let r = maximize_acquisition(ramp, 3, &mut rng, &effort, &[]).unwrap();
        assert!(r.point.iter().all(|v| (v - 1.0).abs() < 0.02), "{:?}", r.point);
    }

    #[test]
    fn maximizer_beats_screening_and_uses_extra_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let effort = SearchEffort {
            n_candidates: 5,
            n_starts: 1,
            max_iter: 0,
        };
        let peak = |x: &[f64]| -(x[0] - 0.123).abs();
        let r = maximize_acquisition(peak, 1, &mut rng, &effort, &[vec![0.123]]).unwrap();
        assert_eq!(r.point, vec![0.123]);
        assert_eq!(r.value, 0.0);
        assert!(r.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn maximizer_skips_non_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let effort = SearchEffort::default();
        let holes = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] };
        let r = maximize_acquisition(holes, 1, &mut rng, &effort, &[]).unwrap();
        assert!(r.value.is_finite() && r.point[0] <= 0.5);
        let none = |_: &[f64]| f64::NAN;
        assert!(maximize_acquisition(none, 1, &mut rng, &effort, &[]).is_err());
    }

    proptest! {
        #[test]
        fn improvement_minus_shortfall_is_the_gap(
            mean in -5.0f64..5.0,
            sd in 0.0f64..3.0,
            inc in -5.0f64..5.0,
            remaining in 1usize..500,
        ) {
            let c = ctx(inc, 1000, 1000 - remaining);
            let diff = ei_value(mean, sd, inc) - remaining as f64 * evaluation_cost(mean, sd, &c).unwrap();
            prop_assert!((diff - (mean - inc)).abs() <= 1e-10, "{}", diff - (mean - inc));
        }

        #[test]
        fn ei_bounds_and_monotonicity(mean in -4.0f64..4.0, sd in 0.0f64..3.0, inc in -4.0f64..4.0, dm in 0.0f64..1.0, ds in 0.0f64..1.0) {
            let ei = ei_value(mean, sd, inc);
            prop_assert!(ei >= 0.0 && ei >= mean - inc - 1e-12);
            prop_assert!(ei_value(mean + dm, sd, inc) >= ei - 1e-12);
            if mean <= inc {
                prop_assert!(ei_value(mean, sd + ds, inc) >= ei - 1e-12);
            }
        }

        #[test]
        fn cost_monotone_and_scaled(mean in -4.0f64..4.0, sd in 0.0f64..3.0, inc in -4.0f64..4.0, dm in 0.0f64..1.0, rem in 1usize..200) {
            let c1 = evaluation_cost(mean, sd, &ctx(inc, 500, 500 - rem)).unwrap();
            prop_assert!(evaluation_cost(mean + dm, sd, &ctx(inc, 500, 500 - rem)).unwrap() <= c1 + 1e-12);
            let c_unit = evaluation_cost(mean, sd, &ctx(inc, 500, 499)).unwrap();
            prop_assert!((c1 * rem as f64 - c_unit).abs() <= 1e-12 * c_unit.max(1.0));
        }

        #[test]
        fn incumbent_dominates_sample_means(seed in 0u64..5000, b in 0.01f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut l = ObservationLedger::new(1);
            for _ in 0..15 {
                l.record(&[rng.random_range(0..6) as f64 / 5.0], rng.random::<f64>()).unwrap();
            }
            let inc = incumbent_value(&l, b, 0.1).unwrap().value;
            prop_assert!(l.sample_means().iter().all(|m| inc >= *m));
        }
    }
}
