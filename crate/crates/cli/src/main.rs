use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acblocks::bw_repr::ProgramOptions;
use acblocks::harness::{
    chain_experiment, maxchain_experiment, run_plan, summarize_chain, summarize_maxchain, summary_path, write_csv,
    ModelParams, NeuralSettings, RunPlanError,
};
use acblocks::instances::{parse_task, random_task, serialize_task, TaskFile};
use acblocks::planner::{parse_plan, validate_plan, Provenance};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Assembly Calculus blocks-world planner and chaining experiments.
#[derive(Parser)]
#[command(name = "acblocks", version)]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true, env = "ACBLOCKS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a task file symbolically or on the simulated brain.
    Plan(PlanArgs),
    /// Chain stacks of several lengths and read them back.
    ChainExp(ChainArgs),
    /// Longest chain read back correctly, per (n, k).
    MaxchainExp(MaxChainArgs),
    /// Strong-assembly counts during readout.
    StrongExp(ChainArgs),
    /// Check that a plan solves a task (exit 0 valid, 1 invalid, 2 unreadable input).
    Validate(ValidateArgs),
    /// Emit a random task.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct Model {
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum strong-projection rounds per program step.
    #[arg(long, default_value_t = ProgramOptions::default().strong.min_rounds)]
    min_rounds: usize,
    /// Maximum strong-projection rounds per program step.
    #[arg(long, default_value_t = ProgramOptions::default().strong.max_rounds)]
    max_rounds: usize,
}

impl Model {
    fn opts(&self) -> ProgramOptions {
        let mut opts = ProgramOptions::default();
        opts.strong.min_rounds = self.min_rounds;
        opts.strong.max_rounds = self.max_rounds;
        opts
    }

    fn params(&self) -> ModelParams {
        ModelParams {
            p: self.p,
            beta: self.beta,
            master_seed: self.seed,
            opts: self.opts(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Naive,
    Approx,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Symbolic,
    Neural,
}

#[derive(Args)]
struct PlanArgs {
    /// Task file.
    task: PathBuf,
    #[arg(long, value_enum, default_value = "approx")]
    algo: Algo,
    #[arg(long, value_enum, default_value = "symbolic")]
    mode: Mode,
    #[arg(long, default_value_t = 100_000)]
    n: u32,
    #[arg(long, default_value_t = 50)]
    k: u32,
    #[command(flatten)]
    model: Model,
    /// Plan file to write; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10_000u32, 100_000])]
    n: Vec<u32>,
    #[arg(long, default_value_t = 50)]
    k: u32,
    #[arg(long, value_delimiter = ',', default_values_t = [3u32, 5, 7])]
    lengths: Vec<u32>,
    #[arg(long, default_value_t = 20)]
    trials: u32,
    #[command(flatten)]
    model: Model,
    /// Per-trial CSV; the summary goes next to it as `<stem>.summary.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaxChainArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10_000u32, 100_000])]
    n: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [10u32, 20, 30, 50])]
    k: Vec<u32>,
    #[arg(long, default_value_t = 20)]
    trials: u32,
    /// Longest chain tried.
    #[arg(long, default_value_t = 30)]
    max_len: u32,
    #[command(flatten)]
    model: Model,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    task: PathBuf,
    plan: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    blocks: u32,
    #[arg(long, default_value_t = 5)]
    max_stacks: u32,
    #[arg(long, default_value_t = 7)]
    max_height: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_task(path: &Path) -> Result<TaskFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_task(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn plan(args: &PlanArgs) -> Result<ExitCode> {
    let task = read_task(&args.task)?;
    let provenance = match args.algo {
        Algo::Naive => Provenance::Naive,
        Algo::Approx => Provenance::TwoApprox,
    };
    let neural = match args.mode {
        Mode::Symbolic => None,
        Mode::Neural => Some(NeuralSettings {
            n: args.n,
            k: args.k,
            p: args.model.p,
            beta: args.model.beta,
            seed: args.model.seed,
            opts: args.model.opts(),
        }),
    };
    match run_plan(&task, provenance, neural.as_ref()) {
        Ok(report) => {
            emit(args.out.as_deref(), &report.plan.to_text())?;
            eprint!("{}", report.describe());
            Ok(if report.validation.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Err(RunPlanError::Neural(e)) => {
            eprintln!("neural execution failed: {e}");
            eprintln!("{:#?}", e.trace);
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

fn chain(args: &ChainArgs, strong: bool) -> Result<()> {
    let records = chain_experiment(&args.n, args.k, &args.lengths, args.trials, &args.model.params())?;
    write_csv(&args.out, &records).with_context(|| format!("writing {}", args.out.display()))?;
    let summary = summarize_chain(&records);
    let path = summary_path(&args.out);
    write_csv(&path, &summary).with_context(|| format!("writing {}", path.display()))?;
    for s in &summary {
        let (mean, std, what) = if strong {
            (s.mean_strong, s.std_strong, "strong")
        } else {
            (s.mean_prefix, s.std_prefix, "prefix")
        };
        println!(
            "n={} k={} len={} trials={}: {what} {mean:.2} ± {std:.2}, rounds/block {:.1}",
            s.n, s.k, s.chain_len, s.trials, s.rounds_per_block
        );
    }
    Ok(())
}

fn maxchain(args: &MaxChainArgs) -> Result<()> {
    let records = maxchain_experiment(&args.n, &args.k, args.trials, args.max_len, &args.model.params())?;
    write_csv(&args.out, &records).with_context(|| format!("writing {}", args.out.display()))?;
    let summary = summarize_maxchain(&records);
    let path = summary_path(&args.out);
    write_csv(&path, &summary).with_context(|| format!("writing {}", path.display()))?;
    for s in &summary {
        println!(
            "n={} k={} trials={}: max chain {:.2} ± {:.2}",
            s.n, s.k, s.trials, s.mean_max_chain, s.std_max_chain
        );
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> ExitCode {
    let inputs = read_task(&args.task).and_then(|task| {
        let text = fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
        let moves = parse_plan(&text).with_context(|| format!("parsing {}", args.plan.display()))?;
        Ok((task, moves))
    });
    let (task, moves) = match inputs {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match validate_plan(&task.initial, &task.goal, &moves) {
        Ok(()) => {
            println!("valid ({} moves)", moves.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("invalid: {e}");
            ExitCode::from(1)
        }
    }
}

fn gen(args: &GenArgs) -> Result<()> {
    let task = random_task(args.blocks, args.max_stacks, args.max_height, args.seed)?;
    emit(args.out.as_deref(), &serialize_task(&task))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Plan(a) => plan(a),
        Command::ChainExp(a) => chain(a, false).map(|()| ExitCode::SUCCESS),
        Command::StrongExp(a) => chain(a, true).map(|()| ExitCode::SUCCESS),
        Command::MaxchainExp(a) => maxchain(a).map(|()| ExitCode::SUCCESS),
        Command::Validate(a) => Ok(validate(a)),
        Command::Gen(a) => gen(a).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
