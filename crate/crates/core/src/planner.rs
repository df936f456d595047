//! Blocks-world configurations, moves, the two planners and their oracles.
//!
//! Stacks are written top first. A move either sends the top of a stack to
//! the table or puts a table block (a size-1 stack) on top of another stack.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bw_repr::{common_suffix, BlockId};

pub mod neural;

pub use neural::{plan_neural, MoveTrace, NeuralPlanError, NeuralPlanner, NeuralTrace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("empty stack")]
    EmptyStack,
    #[error("block 0 is not a valid id")]
    ZeroBlock,
    #[error("block {0} appears twice")]
    DuplicateBlock(BlockId),
    #[error("block {0} is missing (blocks must be 1..={1})")]
    MissingBlock(BlockId, u32),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoveError {
    #[error("block {0} is not in the configuration")]
    UnknownBlock(BlockId),
    #[error("block {0} is not on top of a stack")]
    NotATop(BlockId),
    #[error("block {0} is already on the table")]
    AlreadyOnTable(BlockId),
    #[error("block {0} is not alone on the table")]
    NotOnTable(BlockId),
    #[error("target {0} is not on top of a stack")]
    TargetNotATop(BlockId),
    #[error("cannot put block {0} on itself")]
    SameBlock(BlockId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("initial and goal configurations hold different blocks")]
    BlockSetMismatch,
    #[error("{blocks} blocks is too many for exhaustive search (max {max})")]
    TooLarge { blocks: usize, max: usize },
}

/// Why a plan does not solve a task.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanFailure {
    #[error("move {index} ({mv}) cannot be applied: {error}")]
    Inapplicable { index: usize, mv: Move, error: MoveError },
    #[error("the plan ends in a configuration different from the goal")]
    WrongFinal,
}

/// A set of stacks over blocks `1..=s`.
///
/// Equality ignores the order of the stacks.
#[derive(Debug, Clone, Eq)]
pub struct BWConfig {
    stacks: Vec<Vec<BlockId>>,
}

impl BWConfig {
    pub fn new(stacks: Vec<Vec<BlockId>>) -> Result<Self, ConfigError> {
        let mut seen = HashSet::new();
        for stack in &stacks {
            if stack.is_empty() {
                return Err(ConfigError::EmptyStack);
            }
            for &b in stack {
                if b == 0 {
                    return Err(ConfigError::ZeroBlock);
                }
                if !seen.insert(b) {
                    return Err(ConfigError::DuplicateBlock(b));
                }
            }
        }
        let s = seen.len() as u32;
        if let Some(missing) = (1..=s).find(|b| !seen.contains(b)) {
            return Err(ConfigError::MissingBlock(missing, s));
        }
        Ok(Self { stacks })
    }

    pub fn stacks(&self) -> &[Vec<BlockId>] {
        &self.stacks
    }

    pub fn num_blocks(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum()
    }

    /// Stacks ordered by bottom block.
    pub fn canonical(&self) -> Vec<Vec<BlockId>> {
        let mut stacks = self.stacks.clone();
        stacks.sort_unstable_by_key(|s| *s.last().expect("stacks are non-empty"));
        stacks
    }

    fn locate(&self, b: BlockId) -> Option<(usize, usize)> {
        self.stacks
            .iter()
            .enumerate()
            .find_map(|(i, s)| s.iter().position(|&x| x == b).map(|pos| (i, pos)))
    }
}

impl PartialEq for BWConfig {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl fmt::Display for BWConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stacks.iter().map(|s| format!("{s:?}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    ToTable { block: BlockId },
    PutOn { block: BlockId, target: BlockId },
}

impl Move {
    pub fn block(&self) -> BlockId {
        match *self {
            Move::ToTable { block } | Move::PutOn { block, .. } => block,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::ToTable { block } => write!(f, "TABLE {block}"),
            Move::PutOn { block, target } => write!(f, "PUT {block} ON {target}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

impl FromStr for Move {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let num = |t: &str| t.parse::<BlockId>().map_err(|_| format!("`{t}` is not a block id"));
        match tokens.as_slice() {
            ["TABLE", b] => Ok(Move::ToTable { block: num(b)? }),
            ["PUT", b, "ON", t] => Ok(Move::PutOn {
                block: num(b)?,
                target: num(t)?,
            }),
            _ => Err(format!("expected `TABLE <b>` or `PUT <b> ON <t>`, got `{s}`")),
        }
    }
}

/// Which strategy produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Naive,
    TwoApprox,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Naive => "naive",
            Provenance::TwoApprox => "two_approx",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub moves: Vec<Move>,
    pub provenance: Provenance,
    /// Filled in by neural execution.
    pub trace: Option<NeuralTrace>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// One move per line, newline-terminated.
    pub fn to_text(&self) -> String {
        plan_text(&self.moves)
    }
}

pub fn plan_text(moves: &[Move]) -> String {
    moves.iter().map(|m| format!("{m}\n")).collect()
}

/// Reads the plan text format; blank lines and `#` comments are skipped.
pub fn parse_plan(text: &str) -> Result<Vec<Move>, PlanParseError> {
    let mut moves = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        moves.push(line.parse().map_err(|message| PlanParseError { line: i + 1, message })?);
    }
    Ok(moves)
}

pub fn apply_move(config: &BWConfig, mv: Move) -> Result<BWConfig, MoveError> {
    let block = mv.block();
    let (si, pos) = config.locate(block).ok_or(MoveError::UnknownBlock(block))?;
    let mut stacks = config.stacks.clone();
    match mv {
        Move::ToTable { .. } => {
            if pos != 0 {
                return Err(MoveError::NotATop(block));
            }
            if stacks[si].len() == 1 {
                return Err(MoveError::AlreadyOnTable(block));
            }
            stacks[si].remove(0);
            stacks.push(vec![block]);
        }
        Move::PutOn { target, .. } => {
            if target == block {
                return Err(MoveError::SameBlock(block));
            }
            if stacks[si].len() != 1 {
                return Err(MoveError::NotOnTable(block));
            }
            let (ti, tpos) = config.locate(target).ok_or(MoveError::UnknownBlock(target))?;
            if tpos != 0 {
                return Err(MoveError::TargetNotATop(target));
            }
            stacks[ti].insert(0, block);
            stacks.remove(si);
        }
    }
    Ok(BWConfig { stacks })
}

/// Replays `moves` from `init` and checks the result against `goal`.
pub fn validate_plan(init: &BWConfig, goal: &BWConfig, moves: &[Move]) -> Result<(), PlanFailure> {
    let mut config = init.clone();
    for (index, &mv) in moves.iter().enumerate() {
        config = apply_move(&config, mv).map_err(|error| PlanFailure::Inapplicable { index, mv, error })?;
    }
    if config == *goal {
        Ok(())
    } else {
        Err(PlanFailure::WrongFinal)
    }
}

fn check_same_blocks(init: &BWConfig, goal: &BWConfig) -> Result<(), PlanError> {
    // both are contiguous 1..=s, so equal sizes means equal sets
    if init.num_blocks() == goal.num_blocks() {
        Ok(())
    } else {
        Err(PlanError::BlockSetMismatch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackMatch {
    pub init: usize,
    pub goal: usize,
    /// Common-suffix height, always positive.
    pub height: usize,
}

/// Pairing of initial to goal stacks by common bottom sub-stack.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<StackMatch>,
}

impl Matching {
    /// Greedy maximum pairing over a table of heights `heights[init][goal]`:
    /// the largest height first, ties to the lowest init then goal index.
    /// Zero heights are never paired.
    pub fn greedy(heights: &[Vec<usize>]) -> Self {
        let mut candidates: Vec<StackMatch> = heights
            .iter()
            .enumerate()
            .flat_map(|(init, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &h)| h > 0)
                    .map(move |(goal, &height)| StackMatch { init, goal, height })
            })
            .collect();
        candidates.sort_by(|a, b| b.height.cmp(&a.height).then(a.init.cmp(&b.init)).then(a.goal.cmp(&b.goal)));
        let (mut used_init, mut used_goal) = (HashSet::new(), HashSet::new());
        let mut pairs = Vec::new();
        for c in candidates {
            if !used_init.contains(&c.init) && !used_goal.contains(&c.goal) {
                used_init.insert(c.init);
                used_goal.insert(c.goal);
                pairs.push(c);
            }
        }
        pairs.sort_by_key(|p| p.init);
        Self { pairs }
    }

    pub fn for_init(&self, init: usize) -> Option<&StackMatch> {
        self.pairs.iter().find(|p| p.init == init)
    }

    pub fn for_goal(&self, goal: usize) -> Option<&StackMatch> {
        self.pairs.iter().find(|p| p.goal == goal)
    }

    pub fn total_height(&self) -> usize {
        self.pairs.iter().map(|p| p.height).sum()
    }
}

/// Symbolic matching by common suffix.
pub fn match_stacks(init: &BWConfig, goal: &BWConfig) -> Result<Matching, PlanError> {
    check_same_blocks(init, goal)?;
    let heights: Vec<Vec<usize>> = init
        .stacks
        .iter()
        .map(|a| goal.stacks.iter().map(|b| common_suffix(a, b).0).collect())
        .collect();
    Ok(Matching::greedy(&heights))
}

/// Blocks outside every matched common suffix.
pub fn misplaced_count(init: &BWConfig, goal: &BWConfig) -> Result<usize, PlanError> {
    Ok(init.num_blocks() - match_stacks(init, goal)?.total_height())
}

/// How many blocks each init stack sheds and each goal stack gains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Schedule {
    /// Per init stack: number of tops popped to the table.
    pub(crate) pops: Vec<usize>,
    /// Per goal stack: `(matched init stack, kept height)`; unmatched goal
    /// stacks keep their bottom block, which is already on the table.
    pub(crate) builds: Vec<(Option<usize>, usize)>,
}

impl Schedule {
    pub(crate) fn new(init_lens: &[usize], goal_lens: usize, matching: &Matching) -> Self {
        let pops = init_lens
            .iter()
            .enumerate()
            .map(|(i, &len)| len - matching.for_init(i).map_or(1, |m| m.height.max(1)))
            .collect();
        let builds = (0..goal_lens)
            .map(|g| match matching.for_goal(g) {
                Some(m) => (Some(m.init), m.height),
                None => (None, 1),
            })
            .collect();
        Self { pops, builds }
    }
}

fn symbolic_plan(init: &BWConfig, goal: &BWConfig, matching: &Matching, provenance: Provenance) -> Plan {
    let lens: Vec<usize> = init.stacks.iter().map(Vec::len).collect();
    let schedule = Schedule::new(&lens, goal.stacks.len(), matching);
    let mut moves = Vec::new();
    for (stack, &count) in init.stacks.iter().zip(&schedule.pops) {
        moves.extend(stack[..count].iter().map(|&block| Move::ToTable { block }));
    }
    for (stack, &(_, kept)) in goal.stacks.iter().zip(&schedule.builds) {
        let base = stack.len() - kept;
        for pos in (0..base).rev() {
            moves.push(Move::PutOn {
                block: stack[pos],
                target: stack[pos + 1],
            });
        }
    }
    Plan {
        moves,
        provenance,
        trace: None,
    }
}

/// Unstacks every initial stack to the table, then builds every goal stack
/// from its bottom block.
pub fn plan_naive(init: &BWConfig, goal: &BWConfig) -> Result<Plan, PlanError> {
    check_same_blocks(init, goal)?;
    Ok(symbolic_plan(init, goal, &Matching::default(), Provenance::Naive))
}

/// Moves to the table only the blocks above each matched common bottom
/// sub-stack, then rebuilds the goal stacks on top of what was kept.
pub fn plan_2approx(init: &BWConfig, goal: &BWConfig) -> Result<Plan, PlanError> {
    let matching = match_stacks(init, goal)?;
    Ok(symbolic_plan(init, goal, &matching, Provenance::TwoApprox))
}

/// Largest instance the exhaustive search accepts.
pub const MAX_BFS_BLOCKS: usize = 7;

type Key = Vec<Vec<BlockId>>;

fn successors(stacks: &Key) -> impl Iterator<Item = Key> + '_ {
    let to_table = stacks.iter().enumerate().filter(|(_, s)| s.len() > 1).map(move |(i, s)| {
        let mut next = stacks.clone();
        next[i].remove(0);
        next.push(vec![s[0]]);
        next.sort_unstable_by_key(|s| *s.last().unwrap());
        next
    });
    let put_on = stacks.iter().enumerate().filter(|(_, s)| s.len() == 1).flat_map(move |(i, s)| {
        (0..stacks.len()).filter(move |&t| t != i).map(move |t| {
            let mut next = stacks.clone();
            next[t].insert(0, s[0]);
            next.remove(i);
            next
        })
    });
    to_table.chain(put_on)
}

/// Move distance from `from` to every reachable configuration.
///
/// Every move can be undone by one move, so this is also the distance to
/// `from`.
pub fn distances_from(from: &BWConfig) -> HashMap<Vec<Vec<BlockId>>, usize> {
    let start = from.canonical();
    let mut dist = HashMap::from([(start.clone(), 0usize)]);
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        let d = dist[&state];
        for next in successors(&state) {
            if !dist.contains_key(&next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// Exact minimum number of moves, by breadth-first search.
pub fn optimal_plan_length(init: &BWConfig, goal: &BWConfig) -> Result<usize, PlanError> {
    check_same_blocks(init, goal)?;
    let blocks = init.num_blocks();
    if blocks > MAX_BFS_BLOCKS {
        return Err(PlanError::TooLarge {
            blocks,
            max: MAX_BFS_BLOCKS,
        });
    }
    let target = goal.canonical();
    let start = init.canonical();
    if start == target {
        return Ok(0);
    }
    let mut seen = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next_frontier = Vec::new();
        for state in &frontier {
            for next in successors(state) {
                if next == target {
                    return Ok(depth);
                }
                if seen.insert(next.clone()) {
                    next_frontier.push(next);
                }
            }
        }
        frontier = next_frontier;
    }
    unreachable!("every configuration over the same blocks is reachable")
}

/// Every configuration of blocks `1..=s`, each exactly once.
///
/// Built by inserting blocks in increasing order at any position of an
/// existing stack or as a new stack.
pub fn all_configurations(s: u32) -> Vec<BWConfig> {
    let mut configs: Vec<Key> = vec![Vec::new()];
    for b in 1..=s {
        let mut next = Vec::new();
        for stacks in &configs {
            for i in 0..stacks.len() {
                for pos in 0..=stacks[i].len() {
                    let mut c = stacks.clone();
                    c[i].insert(pos, b);
                    next.push(c);
                }
            }
            let mut c = stacks.clone();
            c.push(vec![b]);
            next.push(c);
        }
        configs = next;
    }
    configs.into_iter().map(|stacks| BWConfig { stacks }).collect()
}
