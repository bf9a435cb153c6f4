use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use eic_core::harness::{self, output, ExperimentConfig, Manifest, EXIT_CONFIG};
use eic_core::{AlgorithmId, Error, FunctionId};

/// Benchmark EIC against EI, EI-Nguyen, GP-UCB and GP-TS on noisy test functions.
#[derive(Parser, Debug)]
#[command(name = "eic-bench", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Re-run one trial from a manifest and print its raw CSV rows.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON config file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SCHWEFEL2, EGGHOLDER2, ACKLEY2, LEVY4, GRIEWANK6 or HARTMANN6.
    #[arg(long)]
    function: Option<FunctionId>,
    /// Comma-separated subset of EIC, EI, EI_NGUYEN, GP_UCB, GP_TS.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<AlgorithmId>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Iterations after the initial design.
    #[arg(long)]
    budget_extra: Option<usize>,
    /// Initial design size.
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Re-estimate hyperparameters every k adaptive iterations.
    #[arg(long)]
    reestimate_every: Option<usize>,
    /// Random candidates scored before local refinement.
    #[arg(long)]
    n_candidates: Option<usize>,
    /// Candidate-set size of GP-TS.
    #[arg(long)]
    ts_candidates: Option<usize>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    algo: AlgorithmId,
    #[arg(long)]
    trial: usize,
    /// Exit with status 1 unless the replayed rows match the stored raw CSV.
    #[arg(long)]
    check: bool,
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { c.$f = v; })*};
        }
        set!(function, algos, trials, noise_sd, seed, out, n_candidates, ts_candidates);
        if self.budget_extra.is_some() {
            c.budget_extra = self.budget_extra;
        }
        if self.n0.is_some() {
            c.n0 = self.n0;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if self.reestimate_every.is_some() {
            c.reestimate_every = self.reestimate_every;
        }
        Ok(c)
    }
}

fn run(args: RunArgs) -> anyhow::Result<i32> {
    let cfg = args.resolve()?;
    let outcome = harness::run_experiment(&cfg)?;
    let m = &outcome.manifest;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    for (algo, runs) in &outcome.traces {
        let finals: Vec<f64> = runs.iter().map(|(_, t)| t.final_cumulative_regret()).collect();
        let (mean, sd) = harness::mean_sd(&finals);
        println!(
            "{:<10} trials={:<4} final cumulative regret {:.4} (sd {:.4})",
            algo.as_str(),
            runs.len(),
            mean,
            sd
        );
    }
    println!("results written to {}", outcome.out_dir.display());
    Ok(outcome.exit_code())
}

fn replay(args: ReplayArgs) -> anyhow::Result<i32> {
    let manifest = Manifest::read(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let trace = harness::replay_trial(&manifest, args.algo, args.trial)?;
    let rows = output::raw_rows(args.trial, &trace);
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(output::raw_header(manifest.dim).as_bytes())?;
    stdout.write_all(rows.as_bytes())?;
    if args.check {
        let dir = args.manifest.parent().unwrap_or(std::path::Path::new("."));
        let path = output::raw_path(dir, args.algo, &manifest.objective);
        let stored = output::trial_rows_from_file(&path, args.trial)?;
        if stored != rows {
            eprintln!("replay differs from {}", path.display());
            return Ok(EXIT_CONFIG);
        }
        eprintln!("replay matches {}", path.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Usage errors share the config-error status; 2 means failed trials.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Some(Command::Replay(a)) => replay(a),
        None => run(cli.run),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
