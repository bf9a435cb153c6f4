//! Bayesian optimization under noisy observations, aimed at cumulative regret.
//!
//! The centerpiece is the expected improvement-cost rule (EIC): a new point is
//! sampled only when its expected improvement over an optimistic incumbent
//! is at least its expected shortfall spread over the remaining budget;
//! otherwise the most promising evaluated point is replicated.
//!
//! Modules:
//! * [`gp`]: exact squared-exponential GP regression and likelihood fitting,
//! * [`acquisition`]: EI, evaluation cost, incumbent, UCB, Thompson draws and
//!   the inner maximizer,
//! * [`algorithms`]: the EIC loop and the EI / EI-Nguyen / GP-UCB / GP-TS baselines,
//! * [`testbed`]: the six analytic benchmark objectives with noise,
//! * [`harness`]: multi-trial experiments, regret statistics and result files.

pub mod acquisition;
pub mod algorithms;
pub mod error;
pub mod gp;
pub mod harness;
pub mod normal;
pub mod optim;
pub mod testbed;

pub use acquisition::{AcquisitionContext, ObservationLedger, SearchEffort};
pub use algorithms::{
    run_trial, AlgorithmId, AlgorithmState, DecisionMode, RegretTrace, StepDecision, TraceRecord,
    TrialConfig, TrialSeeds,
};
pub use error::{Error, Result};
pub use gp::{GpPosterior, HyperBounds, KernelSpec, Prediction};
pub use testbed::{FunctionId, Objective, TestFunction};
