use std::fs;
use std::path::Path;

use eic_core::harness::output::{manifest_path, parse_raw, raw_path, summary_path, trial_rows_from_file};
use eic_core::harness::{
    replay_trial, run_experiment, run_experiment_with, ExperimentConfig, Manifest, TrialStatus,
    EXIT_OK, EXIT_TRIAL_FAILURES,
};
use eic_core::{AlgorithmId, Error, FunctionId, Objective, Result};

fn small(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        function: FunctionId::Eggholder2,
        algos: vec![AlgorithmId::Eic, AlgorithmId::Ei, AlgorithmId::GpTs],
        trials: 3,
        budget_extra: Some(6),
        n0: Some(9),
        seed: 42,
        out: out.to_path_buf(),
        n_candidates: 150,
        n_starts: 2,
        max_iter: 50,
        hyper_restarts: 3,
        ts_candidates: 150,
        ..Default::default()
    }
}

#[test]
fn minimal_run_has_one_short_trace_and_no_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        algos: vec![AlgorithmId::Eic],
        trials: 1,
        budget_extra: Some(1),
        ..small(dir.path())
    };
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.exit_code(), EXIT_OK);
    let traces = &out.traces[&AlgorithmId::Eic];
    assert_eq!(traces.len(), 1);
    assert_eq!(traces[0].1.len(), 10);
    assert!(raw_path(dir.path(), AlgorithmId::Eic, "EGGHOLDER2").exists());
    assert!(manifest_path(dir.path()).exists());
    assert!(!summary_path(dir.path(), "EGGHOLDER2").exists());
    assert!(!out.manifest.warnings.is_empty());
}

#[test]
fn raw_csv_schema_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(dir.path())).unwrap();
    for algo in [AlgorithmId::Eic, AlgorithmId::Ei, AlgorithmId::GpTs] {
        let text = fs::read_to_string(raw_path(dir.path(), algo, "EGGHOLDER2")).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "trial,iteration,mode,x1,x2,y,f,regret,cum_regret");
        assert!(!text.contains('\r'));
        let rows = parse_raw(&text).unwrap();
        assert_eq!(rows.len(), 3 * 15);
        let mut cum = 0.0;
        for (trial, rec) in &rows {
            if rec.iteration == 1 {
                cum = 0.0;
            }
            cum += rec.regret;
            assert!((cum - rec.cum_regret).abs() <= 1e-9);
            let stored = &out.traces[&algo][*trial].1.records[rec.iteration - 1];
            assert_eq!(stored, rec);
        }
    }
    let summary = fs::read_to_string(summary_path(dir.path(), "EGGHOLDER2")).unwrap();
    assert!(summary.starts_with("iteration,algo,mean,ci_low,ci_high\n"));
    assert_eq!(summary.lines().count(), 1 + 3 * 15);
    assert!(dir.path().join("regret_EGGHOLDER2.svg").exists());
}

#[test]
fn rerun_and_thread_count_do_not_change_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small(a.path())).unwrap();
    run_experiment(&ExperimentConfig {
        threads: Some(3),
        ..small(b.path())
    })
    .unwrap();
    for name in [
        "raw_EIC_EGGHOLDER2.csv",
        "raw_EI_EGGHOLDER2.csv",
        "raw_GP_TS_EGGHOLDER2.csv",
        "summary_EGGHOLDER2.csv",
        "regret_EGGHOLDER2.svg",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn replay_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small(dir.path())).unwrap();
    let m = Manifest::read(&manifest_path(dir.path())).unwrap();
    for algo in [AlgorithmId::Eic, AlgorithmId::GpTs] {
        let t = replay_trial(&m, algo, 2).unwrap();
        let rows = eic_core::harness::output::raw_rows(2, &t);
        let stored = trial_rows_from_file(&raw_path(dir.path(), algo, "EGGHOLDER2"), 2).unwrap();
        assert_eq!(rows, stored);
    }
    assert!(replay_trial(&m, AlgorithmId::GpUcb, 0).is_err());
}

#[test]
fn manifest_records_paired_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(dir.path())).unwrap();
    let m = &out.manifest;
    assert_eq!(m.trials.len(), 9);
    for r in 0..3 {
        let a = m.entry(AlgorithmId::Eic, r).unwrap();
        let b = m.entry(AlgorithmId::GpTs, r).unwrap();
        assert_eq!(a.seeds.noise, b.seeds.noise);
        assert_ne!(a.seeds.policy, b.seeds.policy);
        assert_eq!(a.status, TrialStatus::Ok);
    }
    assert_eq!(m.config, small(dir.path()));
}

#[test]
fn empty_algorithm_list_writes_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        algos: vec![],
        ..small(dir.path())
    };
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    assert!(manifest_path(dir.path()).exists());
}

#[test]
fn unwritable_output_fails_before_any_trial() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = small(&blocker.join("sub"));
    assert!(matches!(run_experiment(&cfg), Err(Error::Io(_))));
}

#[test]
fn invalid_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        trials: 0,
        ..small(dir.path())
    };
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
}

/// Fails on every point in the right half of the square.
struct HalfBroken;

impl Objective for HalfBroken {
    fn name(&self) -> &str {
        "HALF_BROKEN"
    }
    fn dim(&self) -> usize {
        2
    }
    fn evaluate(&self, u: &[f64]) -> Result<f64> {
        if u[0] > 0.5 {
            return Err(Error::InvalidState("simulated evaluation failure".into()));
        }
        Ok(-u[0] * u[0])
    }
    fn optimum_value(&self) -> f64 {
        0.0
    }
}

#[test]
fn failing_trials_are_recorded_and_raise_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment_with(&small(dir.path()), &HalfBroken).unwrap();
    assert_eq!(out.exit_code(), EXIT_TRIAL_FAILURES);
    assert!(out.manifest.failed_fraction > 0.05);
    for e in &out.manifest.trials {
        assert_eq!(e.status, TrialStatus::Failed);
        let msg = e.error.as_deref().unwrap();
        assert!(msg.contains("iteration"), "{msg}");
    }
    let text = fs::read_to_string(raw_path(dir.path(), AlgorithmId::Eic, "HALF_BROKEN")).unwrap();
    assert_eq!(text.lines().count(), 1);
}
