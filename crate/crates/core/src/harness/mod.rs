//! Multi-trial experiments: paired seeding, parallel execution, regret
//! statistics and the result files (raw CSV, summary CSV, SVG plot, manifest).

mod config;
mod experiment;
pub mod output;
mod stats;

pub use config::{default_budget_extra, default_n0, ExperimentConfig};
pub use experiment::{
    replay_trial, run_experiment, run_experiment_with, splitmix64, trial_seeds, ExperimentOutcome,
    Manifest, TrialEntry, TrialStatus, EXIT_CONFIG, EXIT_OK, EXIT_TRIAL_FAILURES,
    MAX_FAILED_FRACTION,
};
pub use stats::{curve_stats, mean_sd, regret_stats, RegretStat, Z_95};
