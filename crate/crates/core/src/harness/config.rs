use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::SearchEffort;
use crate::algorithms::{AlgorithmId, KernelPolicy, TrialConfig};
use crate::error::{Error, Result};
use crate::gp::HyperBounds;
use crate::testbed::{FunctionId, Objective, TestFunction};

/// Flat experiment description; also the JSON config-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: FunctionId,
    pub algos: Vec<AlgorithmId>,
    pub trials: usize,
    /// N − n₀. Defaults to 200, or 400 for Ackley.
    pub budget_extra: Option<usize>,
    /// Initial design size. Defaults to 16, 36, 64 for d = 2, 4, 6.
    pub n0: Option<usize>,
    pub noise_sd: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub n_candidates: usize,
    pub n_starts: usize,
    pub max_iter: usize,
    pub hyper_restarts: usize,
    pub reestimate_every: Option<usize>,
    pub kappa: f64,
    pub ts_candidates: usize,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let effort = SearchEffort::default();
        Self {
            function: FunctionId::Ackley2,
            algos: AlgorithmId::ALL.to_vec(),
            trials: 100,
            budget_extra: None,
            n0: None,
            noise_sd: 0.1,
            seed: 0,
            out: PathBuf::from("results"),
            n_candidates: effort.n_candidates,
            n_starts: effort.n_starts,
            max_iter: effort.max_iter,
            hyper_restarts: 10,
            reestimate_every: None,
            kappa: 1e-4,
            ts_candidates: 2000,
            threads: None,
        }
    }
}

/// Default n₀ for a d-dimensional objective.
pub fn default_n0(dim: usize) -> usize {
    match dim {
        2 => 16,
        4 => 36,
        6 => 64,
        d => 1usize.checked_shl(d as u32).unwrap_or(usize::MAX).max(8 * d),
    }
}

pub fn default_budget_extra(function: FunctionId) -> usize {
    match function {
        FunctionId::Ackley2 => 400,
        _ => 200,
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn objective(&self) -> TestFunction {
        TestFunction::new(self.function)
    }

    pub fn resolved_n0(&self) -> usize {
        self.n0.unwrap_or_else(|| default_n0(self.objective().dim()))
    }

    pub fn resolved_budget_extra(&self) -> usize {
        self.budget_extra
            .unwrap_or_else(|| default_budget_extra(self.function))
    }

    /// N = n₀ + budget_extra.
    pub fn budget(&self) -> usize {
        self.resolved_n0() + self.resolved_budget_extra()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        if self.resolved_budget_extra() == 0 {
            return bad("budget_extra must be >= 1");
        }
        if self.resolved_n0() == 0 {
            return bad("n0 must be >= 1");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be a finite value >= 0");
        }
        if self.hyper_restarts == 0 {
            return bad("hyper_restarts must be >= 1");
        }
        if self.n_candidates == 0 && self.n_starts == 0 {
            return bad("the inner search needs candidates or starts");
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1");
        }
        Ok(())
    }

    pub fn trial_config(&self) -> TrialConfig {
        let mut cfg = TrialConfig::new(self.budget(), self.resolved_n0(), self.noise_sd);
        cfg.kernel = KernelPolicy::Estimate {
            bounds: HyperBounds::default(),
            restarts: self.hyper_restarts,
            reestimate_every: self.reestimate_every,
        };
        cfg.effort = SearchEffort {
            n_candidates: self.n_candidates,
            n_starts: self.n_starts,
            max_iter: self.max_iter,
        };
        cfg.kappa = self.kappa;
        cfg.ts_candidates = self.ts_candidates;
        cfg
    }
}
