use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_trial, AlgorithmId, RegretTrace, TrialConfig, TrialSeeds};
use crate::error::{Error, Result};
use crate::gp::KernelSpec;
use crate::testbed::{FunctionId, Objective, TestFunction};

use super::config::ExperimentConfig;
use super::output;
use super::stats::{regret_stats, RegretStat};

/// Above this fraction of failed trials the run is reported as failed.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_TRIAL_FAILURES: i32 = 2;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds of trial `r`. The noise seed depends only on (base, r), so every
/// algorithm sees the same observation noise for the same trial index.
pub fn trial_seeds(base: u64, algorithm: AlgorithmId, r: usize) -> TrialSeeds {
    let noise = splitmix64(splitmix64(base) ^ r as u64);
    let policy = splitmix64(
        splitmix64(base ^ 0x005E_ED0F_A160) ^ ((algorithm.index() + 1) << 40) ^ r as u64,
    );
    TrialSeeds { noise, policy }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub algorithm: AlgorithmId,
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub status: TrialStatus,
    pub error: Option<String>,
    pub final_cum_regret: Option<f64>,
    pub kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub objective: String,
    pub dim: usize,
    pub config: ExperimentConfig,
    pub trial_config: TrialConfig,
    pub trials: Vec<TrialEntry>,
    pub failed_fraction: f64,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn entry(&self, algorithm: AlgorithmId, trial: usize) -> Option<&TrialEntry> {
        self.trials
            .iter()
            .find(|e| e.algorithm == algorithm && e.trial == trial)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Successful traces per algorithm, ordered by trial index.
    pub traces: BTreeMap<AlgorithmId, Vec<(usize, RegretTrace)>>,
    pub stats: Vec<(AlgorithmId, Vec<RegretStat>)>,
}

impl ExperimentOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.failed_fraction > MAX_FAILED_FRACTION {
            EXIT_TRIAL_FAILURES
        } else {
            EXIT_OK
        }
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".eic-write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn manifest_for(cfg: &ExperimentConfig, objective: &dyn Objective) -> Manifest {
    Manifest {
        tool: "eic-bench".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        objective: objective.name().to_string(),
        dim: objective.dim(),
        config: cfg.clone(),
        trial_config: cfg.trial_config(),
        trials: Vec::new(),
        failed_fraction: 0.0,
        warnings: Vec::new(),
    }
}

/// Runs the configured experiment on its built-in test function.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let objective = TestFunction::new(cfg.function);
    run_experiment_with(cfg, &objective)
}

/// Runs every (algorithm, trial) pair on `objective`, writing raw rows as
/// trials complete (in trial order), then the summary, plot and manifest.
///
/// Failed trials are recorded in the manifest rather than aborting the run;
/// see [`ExperimentOutcome::exit_code`].
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    objective: &dyn Objective,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let trial_cfg = cfg.trial_config();
    trial_cfg
        .validate(objective.dim())
        .map_err(|e| Error::Config(e.to_string()))?;
    let dir = cfg.out.clone();
    ensure_writable(&dir)?;
    let mut manifest = manifest_for(cfg, objective);
    let name = objective.name().to_string();

    let mut algos = cfg.algos.clone();
    algos.sort();
    algos.dedup();
    if algos.is_empty() {
        manifest.warnings.push("no algorithms selected".into());
        manifest.write(&output::manifest_path(&dir))?;
        return Err(Error::Config("no algorithms selected".into()));
    }

    let tasks: Vec<(AlgorithmId, usize)> = algos
        .iter()
        .flat_map(|&a| (0..cfg.trials).map(move |r| (a, r)))
        .collect();

    let mut writers = BTreeMap::new();
    for &a in &algos {
        let mut w = BufWriter::new(File::create(output::raw_path(&dir, a, &name))?);
        w.write_all(output::raw_header(objective.dim()).as_bytes())?;
        w.flush()?;
        writers.insert(a, w);
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| Error::Resource(e.to_string()))?
    };

    type Done = (AlgorithmId, usize, TrialSeeds, Result<RegretTrace>);
    let (tx, rx) = mpsc::channel::<Done>();
    let collected = std::thread::scope(|scope| -> Result<_> {
        let collector = scope.spawn(move || -> Result<_> {
            let mut next: BTreeMap<AlgorithmId, usize> = algos.iter().map(|&a| (a, 0)).collect();
            let mut pending: BTreeMap<(AlgorithmId, usize), (TrialSeeds, Result<RegretTrace>)> =
                BTreeMap::new();
            let mut entries = Vec::new();
            let mut traces: BTreeMap<AlgorithmId, Vec<(usize, RegretTrace)>> = BTreeMap::new();
            for (a, r, seeds, res) in rx {
                pending.insert((a, r), (seeds, res));
                let n = next.get_mut(&a).expect("known algorithm");
                while let Some((seeds, res)) = pending.remove(&(a, *n)) {
                    let w = writers.get_mut(&a).expect("known algorithm");
                    let entry = match res {
                        Ok(trace) => {
                            w.write_all(output::raw_rows(*n, &trace).as_bytes())?;
                            w.flush()?;
                            let e = TrialEntry {
                                algorithm: a,
                                trial: *n,
                                seeds,
                                status: TrialStatus::Ok,
                                error: None,
                                final_cum_regret: Some(trace.final_cumulative_regret()),
                                kernel: Some(trace.kernel.clone()),
                            };
                            traces.entry(a).or_default().push((*n, trace));
                            e
                        }
                        Err(err) => TrialEntry {
                            algorithm: a,
                            trial: *n,
                            seeds,
                            status: TrialStatus::Failed,
                            error: Some(err.to_string()),
                            final_cum_regret: None,
                            kernel: None,
                        },
                    };
                    entries.push(entry);
                    *n += 1;
                }
            }
            Ok((entries, traces))
        });
        pool.install(|| {
            tasks.par_iter().for_each_with(tx, |tx, &(a, r)| {
                let seeds = trial_seeds(cfg.seed, a, r);
                let res = run_trial(a, objective, &trial_cfg, seeds);
                // The collector only stops early on an I/O error, reported below.
                let _ = tx.send((a, r, seeds, res));
            })
        });
        collector.join().expect("collector thread panicked")
    })?;
    let (mut entries, traces) = collected;
    entries.sort_by_key(|e| (e.algorithm, e.trial));

    let failed = entries
        .iter()
        .filter(|e| e.status == TrialStatus::Failed)
        .count();
    manifest.failed_fraction = failed as f64 / entries.len() as f64;
    if failed > 0 {
        manifest
            .warnings
            .push(format!("{failed} of {} trials failed", entries.len()));
    }
    manifest.trials = entries;

    let mut stats = Vec::new();
    for (&a, runs) in &traces {
        if runs.len() < 2 {
            manifest.warnings.push(format!(
                "{a}: {} successful trial(s); no confidence band computed",
                runs.len()
            ));
            continue;
        }
        let ts: Vec<RegretTrace> = runs.iter().map(|(_, t)| t.clone()).collect();
        stats.push((a, regret_stats(&ts)?));
    }
    if stats.is_empty() {
        manifest
            .warnings
            .push("summary and plot omitted: fewer than 2 successful trials per algorithm".into());
    } else {
        fs::write(output::summary_path(&dir, &name), output::summary_csv(&stats))?;
        fs::write(output::plot_path(&dir, &name), output::regret_svg(&name, &stats))?;
    }
    manifest.write(&output::manifest_path(&dir))?;

    Ok(ExperimentOutcome {
        out_dir: dir,
        manifest,
        traces,
        stats,
    })
}

/// Re-runs one trial from a manifest written for a built-in function.
pub fn replay_trial(manifest: &Manifest, algorithm: AlgorithmId, trial: usize) -> Result<RegretTrace> {
    let entry = manifest.entry(algorithm, trial).ok_or_else(|| {
        Error::Config(format!("manifest has no trial {trial} for {algorithm}"))
    })?;
    let function: FunctionId = manifest.objective.parse()?;
    let objective = TestFunction::new(function);
    run_trial(algorithm, &objective, &manifest.trial_config, entry.seeds)
}
