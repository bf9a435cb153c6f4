//! The optimization loops: EIC and the EI, EI-Nguyen, GP-UCB and GP-TS
//! baselines, all driven by one [`AlgorithmState`].
//!
//! A trial starts with a centered grid design (one replication per point),
//! then performs one evaluation per iteration until the budget N is spent.
//! EIC samples the EI maximizer only when its EI is at least its evaluation
//! cost; otherwise it replicates the evaluated point with the largest upper
//! confidence value.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    self, default_confidence_b, ei_value, evaluation_cost, incumbent_value, maximize_acquisition,
    ts_draw, ucb_beta, ucb_value, AcquisitionContext, ObservationLedger, SearchEffort,
};
use crate::error::{Error, Result};
use crate::gp::{estimate_hyperparameters, GpPosterior, HyperBounds, KernelSpec};
use crate::testbed::{observe, Objective};

/// Largest initial design accepted by default.
pub const DEFAULT_DESIGN_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmId {
    #[serde(rename = "EIC")]
    Eic,
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "EI_NGUYEN")]
    EiNguyen,
    #[serde(rename = "GP_UCB")]
    GpUcb,
    #[serde(rename = "GP_TS")]
    GpTs,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 5] = [
        AlgorithmId::Eic,
        AlgorithmId::Ei,
        AlgorithmId::EiNguyen,
        AlgorithmId::GpUcb,
        AlgorithmId::GpTs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::Eic => "EIC",
            AlgorithmId::Ei => "EI",
            AlgorithmId::EiNguyen => "EI_NGUYEN",
            AlgorithmId::GpUcb => "GP_UCB",
            AlgorithmId::GpTs => "GP_TS",
        }
    }

    /// Stable small integer used when deriving per-trial seeds.
    pub fn index(self) -> u64 {
        match self {
            AlgorithmId::Eic => 0,
            AlgorithmId::Ei => 1,
            AlgorithmId::EiNguyen => 2,
            AlgorithmId::GpUcb => 3,
            AlgorithmId::GpTs => 4,
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMode {
    /// Initial design point.
    #[serde(rename = "INIT")]
    Initial,
    /// A point chosen by the acquisition rule.
    #[serde(rename = "EXPLORE")]
    Explore,
    /// One more replication of an evaluated point.
    #[serde(rename = "RESAMPLE")]
    Resample,
}

impl DecisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionMode::Initial => "INIT",
            DecisionMode::Explore => "EXPLORE",
            DecisionMode::Resample => "RESAMPLE",
        }
    }
}

impl FromStr for DecisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "INIT" => Ok(DecisionMode::Initial),
            "EXPLORE" => Ok(DecisionMode::Explore),
            "RESAMPLE" => Ok(DecisionMode::Resample),
            other => Err(Error::invalid(format!("unknown decision mode '{other}'"))),
        }
    }
}

/// The next point to evaluate and why it was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub point: Vec<f64>,
    pub mode: DecisionMode,
    /// Acquisition at `point` (EI for the EI family, UCB for GP-UCB,
    /// posterior mean for GP-TS).
    pub acquisition_value: f64,
    /// Evaluation cost at `point`; zero for rules that do not use one.
    pub cost_value: f64,
}

/// Which value the EI baselines improve upon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncumbentRule {
    /// max ȳᵢ + b·σ/√tᵢ over evaluated points.
    UpperConfidence,
    /// Best single noisy observation max yᵢ.
    BestObservation,
}

/// Where the kernel hyperparameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPolicy {
    Fixed(KernelSpec),
    /// Maximum likelihood after the initial design, optionally refreshed
    /// every `reestimate_every` adaptive iterations.
    Estimate {
        bounds: HyperBounds,
        restarts: usize,
        reestimate_every: Option<usize>,
    },
}

impl Default for KernelPolicy {
    fn default() -> Self {
        KernelPolicy::Estimate {
            bounds: HyperBounds::default(),
            restarts: 10,
            reestimate_every: None,
        }
    }
}

/// Everything about a trial except the objective and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Total evaluations N, initial design included.
    pub budget: usize,
    /// Initial design size n₀.
    pub n0: usize,
    pub noise_sd: f64,
    pub kernel: KernelPolicy,
    pub effort: SearchEffort,
    /// EIC confidence parameter b; `None` means max(log log N, 0.5).
    pub confidence_b: Option<f64>,
    /// EI-Nguyen threshold κ.
    pub kappa: f64,
    /// GP-UCB confidence δ in the β schedule.
    pub ucb_delta: f64,
    /// Fixed GP-UCB β, overriding the schedule.
    pub ucb_beta: Option<f64>,
    /// Size of the fresh candidate set per GP-TS draw.
    pub ts_candidates: usize,
    /// Extra ranked EI points EIC tests when the EI maximizer fails the cost test.
    pub feasible_fallback: usize,
    pub baseline_incumbent: IncumbentRule,
    pub design_cap: usize,
}

impl TrialConfig {
    pub fn new(budget: usize, n0: usize, noise_sd: f64) -> Self {
        Self {
            budget,
            n0,
            noise_sd,
            kernel: KernelPolicy::default(),
            effort: SearchEffort::default(),
            confidence_b: None,
            kappa: 1e-4,
            ucb_delta: 0.1,
            ucb_beta: None,
            ts_candidates: 2000,
            feasible_fallback: 20,
            baseline_incumbent: IncumbentRule::BestObservation,
            design_cap: DEFAULT_DESIGN_CAP,
        }
    }

    pub fn confidence_b(&self) -> f64 {
        self.confidence_b
            .unwrap_or_else(|| default_confidence_b(self.budget))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::invalid("initial design must have at least one point"));
        }
        if self.budget < self.n0 {
            return Err(Error::invalid(format!(
                "budget {} is smaller than the initial design {}",
                self.budget, self.n0
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise sd must be >= 0"));
        }
        if dim == 0 {
            return Err(Error::invalid("objective has no dimensions"));
        }
        if let KernelPolicy::Fixed(k) = &self.kernel {
            if k.dim() != dim {
                return Err(Error::invalid("fixed kernel dimension differs from the objective"));
            }
        }
        Ok(())
    }
}

/// The two random streams of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    /// Observation noise and the likelihood-search starts; shared by all
    /// algorithms of one trial index.
    pub noise: u64,
    /// Candidate sets and Thompson draws of the algorithm itself.
    pub policy: u64,
}

/// The largest integer m with m^d ≤ n.
pub fn integer_root(n: usize, d: u32) -> usize {
    if n == 0 {
        return 0;
    }
    let mut m = (n as f64).powf(1.0 / f64::from(d)).round() as usize;
    while m > 0 && m.checked_pow(d).is_none_or(|p| p > n) {
        m -= 1;
    }
    while (m + 1).checked_pow(d).is_some_and(|p| p <= n) {
        m += 1;
    }
    m
}

fn grid_rows(m: usize, d: usize) -> Vec<Vec<f64>> {
    let total = m.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut row = vec![0.0; d];
            // Last coordinate varies fastest.
            for c in (0..d).rev() {
                let k = idx % m;
                idx /= m;
                row[c] = (2 * k + 1) as f64 / (2 * m) as f64;
            }
            row
        })
        .collect()
}

/// Centers of the M^d equal sub-cubes of [0,1]^d: coordinates (2k−1)/(2M), k = 1..M.
pub fn initial_design(m: usize, d: usize) -> Result<DMatrix<f64>> {
    initial_design_capped(m, d, DEFAULT_DESIGN_CAP)
}

pub fn initial_design_capped(m: usize, d: usize, cap: usize) -> Result<DMatrix<f64>> {
    if m == 0 || d == 0 {
        return Err(Error::invalid("grid design needs M >= 1 and d >= 1"));
    }
    let size = u32::try_from(d)
        .ok()
        .and_then(|d| m.checked_pow(d))
        .filter(|s| *s <= cap)
        .ok_or_else(|| Error::Resource(format!("{m}^{d} design points exceed the cap {cap}")))?;
    let rows = grid_rows(m, d);
    debug_assert_eq!(rows.len(), size);
    Ok(DMatrix::from_fn(size, d, |i, j| rows[i][j]))
}

/// M = max(1, round(c0^{1/d}·log N)), so that n₀ = M^d grows like (log N)^d.
pub fn choose_initial_m(budget: usize, d: usize, c0: f64) -> usize {
    let m = c0.powf(1.0 / d as f64) * (budget.max(1) as f64).ln();
    if m.is_finite() {
        (m.round() as usize).max(1)
    } else {
        1
    }
}

/// n₀ design points in [0,1]^d. Perfect powers give the centered grid;
/// otherwise the ⌊n₀^{1/d}⌋ grid is topped up greedily with the centers of the
/// next finer grid that lie farthest from the points chosen so far.
pub fn design_points(n0: usize, d: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    if n0 == 0 || d == 0 {
        return Err(Error::invalid("design needs n0 >= 1 and d >= 1"));
    }
    if n0 > cap {
        return Err(Error::Resource(format!("{n0} design points exceed the cap {cap}")));
    }
    let dd = u32::try_from(d).map_err(|_| Error::invalid("dimension too large"))?;
    let m = integer_root(n0, dd);
    let mut points = grid_rows(m, d);
    if points.len() == n0 {
        return Ok(points);
    }
    let finer = m + 1;
    let pool_size = finer
        .checked_pow(dd)
        .filter(|s| *s <= cap)
        .ok_or_else(|| Error::Resource(format!("refinement grid {finer}^{d} exceeds the cap {cap}")))?;
    let pool = grid_rows(finer, d);
    debug_assert_eq!(pool.len(), pool_size);
    let sq_dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut nearest: Vec<f64> = pool
        .iter()
        .map(|c| points.iter().map(|p| sq_dist(c, p)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut taken = vec![false; pool.len()];
    while points.len() < n0 {
        let pick = acquisition::argmax(
            nearest
                .iter()
                .zip(&taken)
                .map(|(d, t)| if *t { f64::NEG_INFINITY } else { *d }),
        )
        .expect("refinement pool is larger than the shortfall");
        taken[pick] = true;
        let chosen = pool[pick].clone();
        for (c, near) in pool.iter().zip(nearest.iter_mut()) {
            *near = near.min(sq_dist(c, &chosen));
        }
        points.push(chosen);
    }
    Ok(points)
}

/// One optimization run in progress.
#[derive(Debug, Clone)]
pub struct AlgorithmState {
    pub algorithm: AlgorithmId,
    pub budget: usize,
    /// Observations made so far, n.
    pub iteration: usize,
    pub noise_sd: f64,
    pub confidence_b: f64,
    ledger: ObservationLedger,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    kernel: KernelSpec,
    posterior: GpPosterior,
    posterior_len: usize,
    rng: ChaCha8Rng,
}

impl AlgorithmState {
    pub fn new(
        algorithm: AlgorithmId,
        budget: usize,
        kernel: KernelSpec,
        noise_sd: f64,
        confidence_b: f64,
        policy_seed: u64,
    ) -> Self {
        let dim = kernel.dim();
        Self {
            algorithm,
            budget,
            iteration: 0,
            noise_sd,
            confidence_b,
            ledger: ObservationLedger::new(dim),
            inputs: Vec::new(),
            outputs: Vec::new(),
            posterior: GpPosterior::prior(&kernel, noise_sd * noise_sd),
            posterior_len: 0,
            kernel,
            rng: ChaCha8Rng::seed_from_u64(policy_seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn ledger(&self) -> &ObservationLedger {
        &self.ledger
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn posterior(&self) -> &GpPosterior {
        &self.posterior
    }

    /// Expanded history, one row per observation.
    pub fn history(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.inputs, &self.outputs)
    }

    /// Files one observation. The posterior is stale until [`refit`](Self::refit).
    pub fn record(&mut self, x: &[f64], y: f64) -> Result<()> {
        if self.iteration >= self.budget {
            return Err(Error::InvalidState("budget exhausted".into()));
        }
        self.ledger.record(x, y)?;
        self.inputs.push(x.to_vec());
        self.outputs.push(y);
        self.iteration += 1;
        Ok(())
    }

    pub fn set_kernel(&mut self, kernel: KernelSpec) -> Result<()> {
        if kernel.dim() != self.dim() {
            return Err(Error::invalid("kernel dimension differs from the state"));
        }
        self.kernel = kernel;
        self.posterior_len = usize::MAX;
        Ok(())
    }

    /// Refits the posterior on the full observation history.
    pub fn refit(&mut self) -> Result<()> {
        self.posterior = GpPosterior::fit_rows(
            &self.inputs,
            &self.outputs,
            self.noise_sd * self.noise_sd,
            &self.kernel,
        )?;
        self.posterior_len = self.inputs.len();
        Ok(())
    }

    fn ensure_fitted(&self) -> Result<()> {
        if self.posterior_len != self.inputs.len() {
            return Err(Error::InvalidState("posterior is stale; call refit".into()));
        }
        Ok(())
    }

    fn check_can_step(&self) -> Result<()> {
        if self.ledger.is_empty() {
            return Err(Error::InvalidState("no observations yet".into()));
        }
        if self.iteration >= self.budget {
            return Err(Error::InvalidState("budget exhausted".into()));
        }
        self.ensure_fitted()
    }

    fn ei_search(&mut self, incumbent: f64, effort: &SearchEffort) -> Result<acquisition::SearchResult> {
        let post = &self.posterior;
        let score = |x: &[f64]| {
            let p = post.predict(x);
            ei_value(p.mean, p.sd(), incumbent)
        };
        maximize_acquisition(score, self.kernel.dim(), &mut self.rng, effort, self.ledger.unique_points())
    }

    fn resample(&self, index: usize, incumbent: f64) -> Result<StepDecision> {
        let point = self.ledger.point(index).to_vec();
        let p = self.posterior.predict(&point);
        let ctx = AcquisitionContext::new(incumbent, self.budget, self.iteration, self.confidence_b)?;
        Ok(StepDecision {
            acquisition_value: ei_value(p.mean, p.sd(), incumbent),
            cost_value: evaluation_cost(p.mean, p.sd(), &ctx)?,
            point,
            mode: DecisionMode::Resample,
        })
    }
}

/// One EIC decision.
pub fn eic_step(state: &mut AlgorithmState, cfg: &TrialConfig) -> Result<StepDecision> {
    state.check_can_step()?;
    let inc = incumbent_value(&state.ledger, state.confidence_b, state.noise_sd)?;
    let ctx = AcquisitionContext::new(inc.value, state.budget, state.iteration, state.confidence_b)?;
    let search = state.ei_search(inc.value, &cfg.effort)?;
    for (x, ei) in search.ranked.iter().take(1 + cfg.feasible_fallback) {
        let p = state.posterior.predict(x);
        let cost = evaluation_cost(p.mean, p.sd(), &ctx)?;
        if *ei >= cost {
            return Ok(StepDecision {
                point: x.clone(),
                mode: DecisionMode::Explore,
                acquisition_value: *ei,
                cost_value: cost,
            });
        }
    }
    state.resample(inc.index, inc.value)
}

/// One decision of a baseline rule.
pub fn baseline_step(state: &mut AlgorithmState, cfg: &TrialConfig) -> Result<StepDecision> {
    state.check_can_step()?;
    let explore = |point: Vec<f64>, acquisition_value: f64| StepDecision {
        point,
        mode: DecisionMode::Explore,
        acquisition_value,
        cost_value: 0.0,
    };
    match state.algorithm {
        AlgorithmId::Eic => Err(Error::invalid("EIC is not a baseline; use eic_step")),
        AlgorithmId::Ei | AlgorithmId::EiNguyen => {
            let incumbent = match cfg.baseline_incumbent {
                IncumbentRule::BestObservation => {
                    state.outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
                IncumbentRule::UpperConfidence => {
                    incumbent_value(&state.ledger, state.confidence_b, state.noise_sd)?.value
                }
            };
            let search = state.ei_search(incumbent, &cfg.effort)?;
            if state.algorithm == AlgorithmId::EiNguyen && search.value < cfg.kappa {
                let best = state
                    .ledger
                    .best_sample_mean()
                    .ok_or_else(|| Error::InvalidState("empty ledger".into()))?;
                let mut d = state.resample(best, incumbent)?;
                d.cost_value = 0.0;
                return Ok(d);
            }
            Ok(explore(search.point, search.value))
        }
        AlgorithmId::GpUcb => {
            let beta = cfg
                .ucb_beta
                .unwrap_or_else(|| ucb_beta(state.iteration, cfg.ucb_delta));
            let post = &state.posterior;
            let score = |x: &[f64]| {
                let p = post.predict(x);
                ucb_value(p.mean, p.sd(), beta)
            };
            let search = maximize_acquisition(
                score,
                state.kernel.dim(),
                &mut state.rng,
                &cfg.effort,
                state.ledger.unique_points(),
            )?;
            Ok(explore(search.point, search.value))
        }
        AlgorithmId::GpTs => {
            let dim = state.kernel.dim();
            let candidates: Vec<Vec<f64>> = (0..cfg.ts_candidates.max(1))
                .map(|_| (0..dim).map(|_| state.rng.random::<f64>()).collect())
                .collect();
            let pick = ts_draw(&state.posterior, &candidates, &mut state.rng)?;
            let point = candidates[pick].clone();
            let mean = state.posterior.predict(&point).mean;
            Ok(explore(point, mean))
        }
    }
}

/// Dispatches to [`eic_step`] or [`baseline_step`].
pub fn step(state: &mut AlgorithmState, cfg: &TrialConfig) -> Result<StepDecision> {
    match state.algorithm {
        AlgorithmId::Eic => eic_step(state, cfg),
        _ => baseline_step(state, cfg),
    }
}

/// One evaluated iteration of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based.
    pub iteration: usize,
    pub mode: DecisionMode,
    /// Unit-cube coordinates.
    pub point: Vec<f64>,
    /// Noisy observation.
    pub y: f64,
    /// Noise-free value.
    pub f: f64,
    pub regret: f64,
    pub cum_regret: f64,
}

/// Per-iteration regret of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub algorithm: AlgorithmId,
    pub seeds: TrialSeeds,
    /// Kernel in force at the end of the run.
    pub kernel: KernelSpec,
    pub records: Vec<TraceRecord>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_cumulative_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cum_regret).collect()
    }
}

/// Stream for the likelihood-search starts, derived from the shared noise seed
/// so every algorithm of a trial index fits the same kernel after the design.
fn estimation_rng(noise_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    rng.set_stream(1);
    rng
}

fn estimate_kernel(
    state: &AlgorithmState,
    bounds: &HyperBounds,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KernelSpec> {
    let (xs, ys) = state.history();
    let d = state.dim();
    let x = DMatrix::from_fn(xs.len(), d, |i, j| xs[i][j]);
    estimate_hyperparameters(&x, ys, state.noise_sd * state.noise_sd, bounds, restarts, rng)
}

fn evaluate_point(
    objective: &dyn Objective,
    cfg: &TrialConfig,
    state: &mut AlgorithmState,
    noise_rng: &mut ChaCha8Rng,
    point: Vec<f64>,
    mode: DecisionMode,
    cum: &mut f64,
) -> Result<TraceRecord> {
    let iteration = state.iteration + 1;
    let y = observe(objective, &point, cfg.noise_sd, noise_rng)?;
    let f = objective.evaluate(&point)?;
    let regret = objective.instantaneous_regret(&point)?;
    state.record(&point, y)?;
    *cum += regret;
    Ok(TraceRecord {
        iteration,
        mode,
        point,
        y,
        f,
        regret,
        cum_regret: *cum,
    })
}

/// Runs one complete trial of `algorithm` on `objective`.
pub fn run_trial(
    algorithm: AlgorithmId,
    objective: &dyn Objective,
    cfg: &TrialConfig,
    seeds: TrialSeeds,
) -> Result<RegretTrace> {
    let dim = objective.dim();
    cfg.validate(dim)?;
    let design = design_points(cfg.n0, dim, cfg.design_cap)?;

    let initial_kernel = match &cfg.kernel {
        KernelPolicy::Fixed(k) => k.clone(),
        KernelPolicy::Estimate { bounds, .. } => {
            let mid = (bounds.length_scale.0 * bounds.length_scale.1).sqrt();
            KernelSpec::isotropic(1.0, mid, dim)?
        }
    };
    let mut state = AlgorithmState::new(
        algorithm,
        cfg.budget,
        initial_kernel,
        cfg.noise_sd,
        cfg.confidence_b(),
        seeds.policy,
    );
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seeds.noise);
    let mut est_rng = estimation_rng(seeds.noise);
    let mut records = Vec::with_capacity(cfg.budget);
    let mut cum = 0.0;

    for x in design {
        let at = state.iteration + 1;
        let rec = evaluate_point(objective, cfg, &mut state, &mut noise_rng, x, DecisionMode::Initial, &mut cum)
            .map_err(|e| e.at_iteration(at))?;
        records.push(rec);
    }

    let adaptive = cfg.budget - cfg.n0;
    if adaptive > 0 {
        if let KernelPolicy::Estimate { bounds, restarts, .. } = &cfg.kernel {
            if cfg.n0 >= 2 {
                let k = estimate_kernel(&state, bounds, *restarts, &mut est_rng)
                    .map_err(|e| e.at_iteration(cfg.n0))?;
                state.set_kernel(k)?;
            }
        }
    }
    for n in cfg.n0..cfg.budget {
        let at = |e: Error| e.at_iteration(n + 1);
        if let KernelPolicy::Estimate {
            bounds,
            restarts,
            reestimate_every: Some(every),
        } = &cfg.kernel
        {
            if *every > 0 && n > cfg.n0 && (n - cfg.n0).is_multiple_of(*every) {
                let k = estimate_kernel(&state, bounds, *restarts, &mut est_rng).map_err(at)?;
                state.set_kernel(k)?;
            }
        }
        state.refit().map_err(at)?;
        let decision = step(&mut state, cfg).map_err(at)?;
        let rec = evaluate_point(objective, cfg, &mut state, &mut noise_rng, decision.point, decision.mode, &mut cum)
            .map_err(at)?;
        records.push(rec);
    }

    Ok(RegretTrace {
        algorithm,
        seeds,
        kernel: state.kernel.clone(),
        records,
    })
}
