//! Running the planners on the neural stack representation.
//!
//! Every initial and goal stack is parsed into its own register bank. Stack
//! heights for the matching come from the neural intersect, popped blocks
//! from neural decodes, and put moves take their block from the goal-stack
//! readout and their target from a decode of the current top.

use thiserror::Error;

use super::{check_same_blocks, BWConfig, Matching, Move, Plan, PlanError, Provenance, Schedule};
use crate::bw_repr::{intersect, parse_stack, pop_top, put_block, readout, BlockId, ProgramOptions, ReprError, StackRegisters, StackRep, TableRep};
use crate::substrate::{AreaId, Brain};

/// Brain plus the shared `Blocks` area that neural planning runs on.
#[derive(Debug, Clone)]
pub struct NeuralPlanner {
    pub brain: Brain,
    pub blocks: AreaId,
    pub n: u32,
    pub k: u32,
    pub beta: f64,
    pub opts: ProgramOptions,
    banks: usize,
}

impl NeuralPlanner {
    pub fn new(num_blocks: u32, n: u32, k: u32, p: f64, beta: f64, seed: u64) -> Result<Self, ReprError> {
        let mut brain = Brain::new(p, seed, beta)?;
        let blocks = brain.add_explicit_area("Blocks", num_blocks, k)?;
        Ok(Self {
            brain,
            blocks,
            n,
            k,
            beta,
            opts: ProgramOptions::default(),
            banks: 0,
        })
    }

    /// A fresh register bank labelled `{prefix}{counter}`.
    pub fn bank(&mut self, prefix: &str) -> Result<StackRegisters, ReprError> {
        let label = format!("{prefix}{}", self.banks);
        self.banks += 1;
        StackRegisters::create(&mut self.brain, self.blocks, &label, self.n, self.k, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveTrace {
    pub mv: Move,
    /// Decode overlaps behind the move: the popped top, or the put block's
    /// goal readout followed by the target decode.
    pub confidences: Vec<f64>,
    pub rounds: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeuralTrace {
    /// Strong-projection rounds of every parsed block, initial stacks first.
    pub parse_rounds: Vec<usize>,
    /// Neural intersect heights, `[init][goal]`.
    pub heights: Vec<Vec<usize>>,
    /// Goal stacks as read back, top first.
    pub goal_readouts: Vec<Vec<BlockId>>,
    pub moves: Vec<MoveTrace>,
    /// Blocks recorded in the table chain, most recent first.
    pub table: Vec<BlockId>,
}

impl NeuralTrace {
    pub fn mean_rounds_per_block(&self) -> f64 {
        if self.parse_rounds.is_empty() {
            return 0.0;
        }
        self.parse_rounds.iter().sum::<usize>() as f64 / self.parse_rounds.len() as f64
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralFailure {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error("goal stack {goal} read back {read} of the {needed} blocks needed")]
    GoalReadout { goal: usize, read: usize, needed: usize },
}

/// A failed neural run with everything recorded up to the failure.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{failure}")]
pub struct NeuralPlanError {
    pub failure: NeuralFailure,
    pub trace: NeuralTrace,
}

/// Runs the naive or 2-approximation planner neurally on `planner`'s brain.
pub fn plan_neural(
    init: &BWConfig,
    goal: &BWConfig,
    provenance: Provenance,
    planner: &mut NeuralPlanner,
) -> Result<Plan, NeuralPlanError> {
    let mut trace = NeuralTrace::default();
    match run(init, goal, provenance, planner, &mut trace) {
        Ok(moves) => Ok(Plan {
            moves,
            provenance,
            trace: Some(trace),
        }),
        Err(failure) => Err(NeuralPlanError { failure, trace }),
    }
}

fn run(
    init: &BWConfig,
    goal: &BWConfig,
    provenance: Provenance,
    planner: &mut NeuralPlanner,
    trace: &mut NeuralTrace,
) -> Result<Vec<Move>, NeuralFailure> {
    check_same_blocks(init, goal)?;
    let opts = planner.opts;
    let parse_all = |planner: &mut NeuralPlanner, stacks: &[Vec<BlockId>], prefix: &str, trace: &mut NeuralTrace| {
        let mut reps = Vec::with_capacity(stacks.len());
        for stack in stacks {
            let regs = planner.bank(prefix)?;
            let parsed = parse_stack(&mut planner.brain, &regs, stack, &opts)?;
            trace.parse_rounds.extend(&parsed.rounds);
            reps.push(parsed.rep);
        }
        Ok::<_, NeuralFailure>(reps)
    };
    let mut init_reps = parse_all(planner, init.stacks(), "I", trace)?;
    let goal_reps = parse_all(planner, goal.stacks(), "G", trace)?;

    let matching = match provenance {
        Provenance::Naive => Matching::default(),
        Provenance::TwoApprox => {
            for a in &init_reps {
                let mut row = Vec::with_capacity(goal_reps.len());
                for b in &goal_reps {
                    row.push(intersect(&mut planner.brain, a, b, &opts)?.height);
                }
                trace.heights.push(row);
            }
            Matching::greedy(&trace.heights)
        }
    };
    let lens: Vec<usize> = init_reps.iter().map(StackRep::len).collect();
    let schedule = Schedule::new(&lens, goal_reps.len(), &matching);

    let table_regs = planner.bank("T")?;
    let mut table = TableRep::new(table_regs);
    let mut moves = Vec::new();

    for (rep, &count) in init_reps.iter_mut().zip(&schedule.pops) {
        for _ in 0..count {
            let popped = pop_top(&mut planner.brain, rep, Some(&mut table), &opts)?;
            let mv = Move::ToTable { block: popped.block };
            moves.push(mv);
            trace.table = table.rep.shadow().to_vec();
            trace.moves.push(MoveTrace {
                mv,
                confidences: vec![popped.confidence],
                rounds: popped.rounds,
            });
        }
    }

    for (g, (goal_rep, &(matched, kept))) in goal_reps.iter().zip(&schedule.builds).enumerate() {
        let len = goal_rep.len();
        let read = readout(&mut planner.brain, goal_rep, len, &opts)?;
        trace.goal_readouts.push(read.blocks.clone());
        let base = len - kept;
        let needed = if matched.is_some() { base } else { len };
        if read.blocks.len() < needed {
            return Err(NeuralFailure::GoalReadout {
                goal: g,
                read: read.blocks.len(),
                needed,
            });
        }
        let mut fresh;
        let dest: &mut StackRep = match matched {
            Some(i) => &mut init_reps[i],
            None => {
                let regs = planner.bank("R")?;
                fresh = StackRep::empty(regs);
                put_block(&mut planner.brain, &mut fresh, read.blocks[len - 1], &opts)?;
                &mut fresh
            }
        };
        for pos in (0..base).rev() {
            let block = read.blocks[pos];
            let top = readout(&mut planner.brain, dest, 1, &opts)?;
            let target_conf = top.confidences.first().copied().unwrap_or(0.0);
            let Some(&target) = top.blocks.first() else {
                return Err(ReprError::DecodeFailure { confidence: target_conf }.into());
            };
            let rounds = put_block(&mut planner.brain, dest, block, &opts)? + top.rounds;
            let mv = Move::PutOn { block, target };
            moves.push(mv);
            trace.moves.push(MoveTrace {
                mv,
                confidences: vec![read.confidences[pos], target_conf],
                rounds,
            });
        }
    }
    Ok(moves)
}
