//! Command-line experiment runner for preference-conditional GFlowNets.
//!
//! Every run writes into one output directory: the resolved config, test
//! preferences, a JSONL log, candidate and front CSVs, a metrics CSV, a
//! checkpoint and `summary.json`.

pub mod compare;
pub mod config;
pub mod io;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mogfn::metrics::{gd_plus, hypervolume, r2_indicator, topk_diversity, topk_reward, HvRef};
use mogfn::{Front, Scalarization};

pub use compare::compare_runs;
pub use config::{parse_config, parse_config_str, ExperimentConfig, Method, Task};
pub use run::{run_experiment, MetricsRow, Summary};

#[derive(Debug, Parser)]
#[command(name = "mogfn", version, about = "Multi-objective GFlowNet experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the config's `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a preference-conditional GFlowNet.
    TrainPc(RunArgs),
    /// Train the REINFORCE baseline.
    TrainRl(RunArgs),
    /// Run the active-learning loop.
    RunAl(RunArgs),
    /// Train on a hypergrid and compare with the exact target distribution.
    ExactCheck(RunArgs),
    /// Compute indicators for a front CSV.
    Metrics {
        #[arg(long)]
        front: PathBuf,
        /// True Pareto front, enabling GD+.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Candidates CSV with preference columns, enabling top-k statistics.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Hypervolume reference coordinate for every objective.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        hv_ref: f64,
        /// Size of the R2 reference-vector lattice.
        #[arg(long, default_value_t = 16)]
        preferences: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate finished runs side by side.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_run(args: &RunArgs, accepts: impl Fn(&ExperimentConfig) -> bool, what: &str) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = parse_config(&args.config)?;
    if !accepts(&cfg) {
        bail!("config {} is not a {what} experiment ({:?}, {:?})", args.config.display(), cfg.task, cfg.method);
    }
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let out = args.out.clone().or_else(|| cfg.out_dir.clone()).context("no output directory: pass --out")?;
    Ok((cfg, out))
}

/// Indicators of a front file, as a one-row metrics CSV.
pub fn metrics_for_files(
    front: &Path,
    truth: Option<&Path>,
    candidates: Option<&Path>,
    k: usize,
    hv_ref: f64,
    preferences: usize,
) -> Result<MetricsRow> {
    let read_front = |p: &Path| -> Result<Front> {
        let f = fs::File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
        Ok(Front::read_csv(f)?)
    };
    let front = read_front(front)?;
    let d = front.dim().context("front is empty")?;
    let refs = run::test_preferences(d, preferences)?;
    let truth = truth.map(read_front).transpose()?;
    let (topk_r, topk_d) = match candidates {
        Some(p) => {
            let sets = run::read_candidates_csv(&fs::read(p).with_context(|| format!("cannot read {}", p.display()))?)?;
            let scal = Scalarization::default();
            (Some(topk_reward(&sets, &scal, k)?), Some(topk_diversity(&sets, &scal, k)?))
        }
        None => (None, None),
    };
    Ok(MetricsRow {
        hv: hypervolume(&front, &HvRef::constant(d, hv_ref)?)?,
        r2: r2_indicator(&front, &refs)?,
        gd_plus: truth.map(|t| gd_plus(&front, &t)).transpose()?,
        topk_reward: topk_r,
        topk_diversity: topk_d,
    })
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => io::write_atomic(p, bytes),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainPc(a) => {
            let (cfg, out) = load_run(&a, |c| c.method == Method::MogfnPc, "mogfn_pc")?;
            report(&run_experiment(&cfg, &out)?, &out)
        }
        Command::TrainRl(a) => {
            let (cfg, out) = load_run(&a, |c| c.method == Method::Moreinforce, "moreinforce")?;
            report(&run_experiment(&cfg, &out)?, &out)
        }
        Command::RunAl(a) => {
            let (cfg, out) = load_run(&a, |c| c.task == Task::Al, "active-learning")?;
            report(&run_experiment(&cfg, &out)?, &out)
        }
        Command::ExactCheck(a) => {
            let (mut cfg, out) =
                load_run(&a, |c| c.task == Task::Hypergrid && c.method == Method::MogfnPc, "hypergrid mogfn_pc")?;
            cfg.eval.exact_check = true;
            let summary = run_experiment(&cfg, &out)?;
            println!("l1_gap {}", summary.l1_gap.expect("exact check records the gap"));
            report(&summary, &out)
        }
        Command::Metrics { front, truth, candidates, k, hv_ref, preferences, out } => {
            let row = metrics_for_files(&front, truth.as_deref(), candidates.as_deref(), k, hv_ref, preferences)?;
            emit(&row.to_csv()?, out.as_deref())
        }
        Command::Compare { runs, out } => emit(compare_runs(&runs)?.as_bytes(), out.as_deref()),
    }
}

fn report(summary: &Summary, out: &Path) -> Result<()> {
    println!("wrote {} (front {}, {:.1}s)", out.display(), &summary.front_hash[..12], summary.wall_time_s);
    Ok(())
}
