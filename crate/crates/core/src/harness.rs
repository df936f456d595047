//! Seeded chaining experiments, planning runs and their CSV output.
//!
//! Every trial builds its own brain from a seed derived as
//! `mix_seed([master_seed, n, k, chain_len, trial])`, so any row can be
//! reproduced alone. Trials run on the rayon pool; output order is always
//! cell by cell, trial by trial.

use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bw_repr::{parse_stack, readout, BlockId, ProgramOptions, ReprError, StackRegisters};
use crate::instances::TaskFile;
use crate::planner::{misplaced_count, plan_2approx, plan_naive, plan_neural, validate_plan, NeuralPlanError, NeuralPlanner, Plan, PlanError, PlanFailure, Provenance};
use crate::substrate::{mix_seed, Brain};

/// Shared model parameters of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub p: f64,
    pub beta: f64,
    pub master_seed: u64,
    pub opts: ProgramOptions,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            p: 0.1,
            beta: 0.1,
            master_seed: 0,
            opts: ProgramOptions::default(),
        }
    }
}

pub fn trial_seed(master: u64, n: u32, k: u32, chain_len: u32, trial: u32) -> u64 {
    mix_seed(&[master, n as u64, k as u64, chain_len as u64, trial as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainTrialRecord {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub beta: f64,
    pub chain_len: u32,
    pub trial: u32,
    pub seed: u64,
    pub correct_prefix: u32,
    pub strong: u32,
    pub rounds: u64,
}

/// Parses the stack `1, 2, ..., len` (top first) into a fresh bank and
/// reads it back.
pub fn chain_trial(n: u32, k: u32, chain_len: u32, trial: u32, params: &ModelParams) -> Result<ChainTrialRecord, ReprError> {
    let seed = trial_seed(params.master_seed, n, k, chain_len, trial);
    let mut brain = Brain::new(params.p, seed, params.beta)?;
    let blocks = brain.add_explicit_area("Blocks", chain_len, k)?;
    let regs = StackRegisters::create(&mut brain, blocks, "S", n, k, params.beta)?;
    let stack: Vec<BlockId> = (1..=chain_len).collect();
    let parsed = parse_stack(&mut brain, &regs, &stack, &params.opts)?;
    let read = readout(&mut brain, &parsed.rep, stack.len(), &params.opts)?;
    Ok(ChainTrialRecord {
        n,
        k,
        p: params.p,
        beta: params.beta,
        chain_len,
        trial,
        seed,
        correct_prefix: read.correct_prefix(&stack) as u32,
        strong: read.strong_count() as u32,
        rounds: parsed.rounds.iter().sum::<usize>() as u64,
    })
}

/// Every `(n, len)` cell at fixed `k`, `trials` trials each.
pub fn chain_experiment(
    n_list: &[u32],
    k: u32,
    lengths: &[u32],
    trials: u32,
    params: &ModelParams,
) -> Result<Vec<ChainTrialRecord>, ReprError> {
    let jobs: Vec<(u32, u32, u32)> = n_list
        .iter()
        .flat_map(|&n| lengths.iter().flat_map(move |&len| (0..trials).map(move |t| (n, len, t))))
        .collect();
    jobs.par_iter()
        .map(|&(n, len, t)| chain_trial(n, k, len, t, params))
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, var.sqrt())
}

/// Per-cell statistics of chain trials (sample standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub beta: f64,
    pub chain_len: u32,
    pub trials: u32,
    pub mean_prefix: f64,
    pub std_prefix: f64,
    pub mean_strong: f64,
    pub std_strong: f64,
    pub rounds_per_block: f64,
}

/// Groups consecutive records of the same cell.
pub fn summarize_chain(records: &[ChainTrialRecord]) -> Vec<ChainSummary> {
    let mut out = Vec::new();
    for cell in records.chunk_by(|a, b| (a.n, a.k, a.chain_len) == (b.n, b.k, b.chain_len)) {
        let first = &cell[0];
        let prefix: Vec<f64> = cell.iter().map(|r| r.correct_prefix as f64).collect();
        let strong: Vec<f64> = cell.iter().map(|r| r.strong as f64).collect();
        let (mean_prefix, std_prefix) = mean_std(&prefix);
        let (mean_strong, std_strong) = mean_std(&strong);
        let rounds: u64 = cell.iter().map(|r| r.rounds).sum();
        out.push(ChainSummary {
            n: first.n,
            k: first.k,
            p: first.p,
            beta: first.beta,
            chain_len: first.chain_len,
            trials: cell.len() as u32,
            mean_prefix,
            std_prefix,
            mean_strong,
            std_strong,
            rounds_per_block: rounds as f64 / (cell.len() as u64 * first.chain_len as u64) as f64,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxChainRecord {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub beta: f64,
    pub trial: u32,
    /// Longest fully read-back chain; 0 if even one block fails.
    pub max_chain: u32,
    /// Strong-projection rounds summed over every length tried.
    pub rounds: u64,
}

/// Tries lengths 1, 2, ... up to `max_len`, each on a fresh brain seeded by
/// [`trial_seed`], and stops at the first length not read back completely.
pub fn maxchain_trial(n: u32, k: u32, trial: u32, max_len: u32, params: &ModelParams) -> Result<MaxChainRecord, ReprError> {
    let mut best = 0;
    let mut rounds = 0;
    for len in 1..=max_len {
        let r = chain_trial(n, k, len, trial, params)?;
        rounds += r.rounds;
        if r.correct_prefix != len {
            break;
        }
        best = len;
    }
    Ok(MaxChainRecord {
        n,
        k,
        p: params.p,
        beta: params.beta,
        trial,
        max_chain: best,
        rounds,
    })
}

pub fn maxchain_experiment(
    n_list: &[u32],
    k_list: &[u32],
    trials: u32,
    max_len: u32,
    params: &ModelParams,
) -> Result<Vec<MaxChainRecord>, ReprError> {
    let jobs: Vec<(u32, u32, u32)> = n_list
        .iter()
        .flat_map(|&n| k_list.iter().flat_map(move |&k| (0..trials).map(move |t| (n, k, t))))
        .collect();
    jobs.par_iter()
        .map(|&(n, k, t)| maxchain_trial(n, k, t, max_len, params))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxChainSummary {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub beta: f64,
    pub trials: u32,
    pub mean_max_chain: f64,
    pub std_max_chain: f64,
}

pub fn summarize_maxchain(records: &[MaxChainRecord]) -> Vec<MaxChainSummary> {
    records
        .chunk_by(|a, b| (a.n, a.k) == (b.n, b.k))
        .map(|cell| {
            let values: Vec<f64> = cell.iter().map(|r| r.max_chain as f64).collect();
            let (mean_max_chain, std_max_chain) = mean_std(&values);
            MaxChainSummary {
                n: cell[0].n,
                k: cell[0].k,
                p: cell[0].p,
                beta: cell[0].beta,
                trials: cell.len() as u32,
                mean_max_chain,
                std_max_chain,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()
}

/// `runs.csv` -> `runs.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

/// Neural execution settings for [`run_plan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuralSettings {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub beta: f64,
    pub seed: u64,
    pub opts: ProgramOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub plan: Plan,
    pub validation: Result<(), PlanFailure>,
    pub misplaced: usize,
}

impl PlanReport {
    /// Human-readable summary lines.
    pub fn describe(&self) -> String {
        let verdict = match &self.validation {
            Ok(()) => "valid".to_string(),
            Err(e) => format!("INVALID ({e})"),
        };
        let mut s = format!(
            "algorithm: {}\nmoves: {}\nmisplaced: {}\nvalidation: {}\n",
            self.plan.provenance,
            self.plan.len(),
            self.misplaced,
            verdict
        );
        if let Some(trace) = &self.plan.trace {
            s.push_str(&format!(
                "rounds per parsed block: {:.2}\nparsed blocks: {}\n",
                trace.mean_rounds_per_block(),
                trace.parse_rounds.len()
            ));
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunPlanError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Neural(#[from] NeuralPlanError),
}

/// Plans `task` symbolically, or neurally when `neural` is given, and
/// validates the result.
pub fn run_plan(task: &TaskFile, provenance: Provenance, neural: Option<&NeuralSettings>) -> Result<PlanReport, RunPlanError> {
    let (init, goal) = (&task.initial, &task.goal);
    let plan = match neural {
        None => match provenance {
            Provenance::Naive => plan_naive(init, goal)?,
            Provenance::TwoApprox => plan_2approx(init, goal)?,
        },
        Some(s) => {
            let mut planner = NeuralPlanner::new(init.num_blocks() as u32, s.n, s.k, s.p, s.beta, s.seed)?;
            planner.opts = s.opts;
            plan_neural(init, goal, provenance, &mut planner)?
        }
    };
    Ok(PlanReport {
        validation: validate_plan(init, goal, &plan.moves),
        misplaced: misplaced_count(init, goal)?,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_coordinate() {
        let base = trial_seed(1, 100, 10, 3, 0);
        assert_eq!(base, trial_seed(1, 100, 10, 3, 0));
        for other in [
            trial_seed(2, 100, 10, 3, 0),
            trial_seed(1, 101, 10, 3, 0),
            trial_seed(1, 100, 11, 3, 0),
            trial_seed(1, 100, 10, 4, 0),
            trial_seed(1, 100, 10, 3, 1),
        ] {
            assert_ne!(base, other);
        }
    }

    #[test]
    fn sample_statistics() {
        assert_eq!(mean_std(&[3.0, 3.0, 3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-12);
    }

    #[test]
    fn summary_path_keeps_directory() {
        assert_eq!(summary_path(Path::new("out/runs.csv")), PathBuf::from("out/runs.summary.csv"));
    }

    #[test]
    fn small_chain_cells_in_order() {
        let params = ModelParams::default();
        let records = chain_experiment(&[2000], 20, &[1, 2], 3, &params).unwrap();
        let cells: Vec<(u32, u32)> = records.iter().map(|r| (r.chain_len, r.trial)).collect();
        assert_eq!(cells, vec![(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]);
        for r in &records {
            assert!(r.correct_prefix <= r.chain_len);
            assert!(r.strong <= r.chain_len);
        }
        let again = chain_trial(2000, 20, 2, 1, &params).unwrap();
        assert_eq!(again, records[4]);
        let summary = summarize_chain(&records);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[1].trials, 3);
    }
}
