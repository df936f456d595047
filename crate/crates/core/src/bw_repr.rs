//! Stacks of blocks stored as chains of assemblies.
//!
//! A register bank is four areas, `Head` and `Node0..Node2`, sharing one
//! explicit `Blocks` area. The nodes form a triangle; every node talks to
//! `Blocks` and to `Head`. A parsed stack is a chain that starts at an
//! assembly in `Head` and walks `Node_j -> Node_(j+1 mod 3)`, each node
//! assembly bound to the assembly of its block in `Blocks`.

use thiserror::Error;

use crate::ac_ops::{OpError, ProjectOptions, StrongProjectOptions, PRESENCE_THRESHOLD, STRONG_THRESHOLD};
use crate::substrate::{AreaId, Assembly, Brain, FiberDirection, SubstrateError};

pub type BlockId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprError {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error("cannot parse an empty stack")]
    EmptyInput,
    #[error("block {0} appears twice")]
    DuplicateBlock(BlockId),
    #[error("block {block} outside 1..={count}")]
    UnknownBlock { block: BlockId, count: u32 },
    #[error("stack is empty")]
    EmptyStack,
    #[error("block {0} is already in the stack")]
    AlreadyInStack(BlockId),
    #[error("could not decode the top block (best overlap {confidence:.2})")]
    DecodeFailure { confidence: f64 },
}

/// Knobs shared by the stack programs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgramOptions {
    pub strong: StrongProjectOptions,
    /// Projections that build new assemblies (put).
    pub project: ProjectOptions,
    /// Plasticity-free projections that walk an existing chain.
    pub retrieval: ProjectOptions,
    pub decode_threshold: f64,
    pub strong_threshold: f64,
    /// How put opens the link from the new top node to the old one.
    /// `Both` also trains the old node back toward whatever it was linked to
    /// before, which after a pop is the popped block.
    pub put_direction: FiberDirection,
}

impl Default for ProgramOptions {
    fn default() -> Self {
        Self {
            strong: StrongProjectOptions {
                min_rounds: 25,
                max_rounds: 30,
                ..Default::default()
            },
            project: ProjectOptions::default(),
            retrieval: ProjectOptions {
                max_rounds: 10,
                tol: 1.0,
                plasticity: false,
            },
            decode_threshold: PRESENCE_THRESHOLD,
            strong_threshold: STRONG_THRESHOLD,
            put_direction: FiberDirection::Forward,
        }
    }
}

/// Areas of one register bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackRegisters {
    pub blocks: AreaId,
    pub head: AreaId,
    pub nodes: [AreaId; 3],
}

impl StackRegisters {
    /// Creates `Head` and `Node0..2` named `{label}.Head`, `{label}.Node0`, ...
    /// with the same `n`, `k`, `beta`, wired to `blocks`.
    pub fn create(brain: &mut Brain, blocks: AreaId, label: &str, n: u32, k: u32, beta: f64) -> Result<Self, ReprError> {
        let head = brain.add_area(&format!("{label}.Head"), n, k, beta)?;
        let mut nodes = [head; 3];
        for (i, node) in nodes.iter_mut().enumerate() {
            *node = brain.add_area(&format!("{label}.Node{i}"), n, k, beta)?;
        }
        for i in 0..3 {
            brain.connect(head, nodes[i])?;
            brain.connect(nodes[i], nodes[(i + 1) % 3])?;
            brain.connect(nodes[i], blocks)?;
        }
        Ok(Self { blocks, head, nodes })
    }

    fn block_count(&self, brain: &Brain) -> Result<u32, ReprError> {
        let area = brain.area(self.blocks)?;
        Ok(area.explicit_count().ok_or(OpError::NotExplicit(self.blocks))?)
    }

    fn check_block(&self, brain: &Brain, block: BlockId) -> Result<(), ReprError> {
        let count = self.block_count(brain)?;
        if block == 0 || block > count {
            return Err(ReprError::UnknownBlock { block, count });
        }
        Ok(())
    }

    fn bank_fibers(&self) -> impl Iterator<Item = (AreaId, AreaId)> + '_ {
        (0..3).flat_map(move |i| {
            [
                (self.head, self.nodes[i]),
                (self.nodes[i], self.nodes[(i + 1) % 3]),
                (self.nodes[i], self.blocks),
            ]
        })
    }

    /// Inhibits every area and fiber of the bank, and `Blocks`.
    pub fn quiesce(&self, brain: &mut Brain) -> Result<(), ReprError> {
        for (a, b) in self.bank_fibers() {
            brain.set_fiber_inhibition(a, b, true, FiberDirection::Both)?;
        }
        for area in [self.blocks, self.head].into_iter().chain(self.nodes) {
            brain.set_area_inhibition(area, true)?;
        }
        Ok(())
    }

    fn open(&self, brain: &mut Brain, areas: &[AreaId], fibers: &[(AreaId, AreaId)], direction: FiberDirection) -> Result<(), ReprError> {
        for &a in areas {
            brain.set_area_inhibition(a, false)?;
        }
        for &(a, b) in fibers {
            brain.set_fiber_inhibition(a, b, false, direction)?;
        }
        Ok(())
    }

    fn close(&self, brain: &mut Brain, areas: &[AreaId], fibers: &[(AreaId, AreaId)]) -> Result<(), ReprError> {
        for &a in areas {
            brain.set_area_inhibition(a, true)?;
        }
        for &(a, b) in fibers {
            brain.set_fiber_inhibition(a, b, true, FiberDirection::Both)?;
        }
        Ok(())
    }

    /// Decodes the block bound to the active assembly of `node`: the explicit
    /// assembly with the largest overlap against the `Blocks` response.
    pub fn decode(&self, brain: &mut Brain, node: AreaId) -> Result<(Option<BlockId>, f64), ReprError> {
        if brain.winners(node).is_empty() {
            return Ok((None, 0.0));
        }
        let response = brain.response(node, self.blocks)?;
        let area = brain.area(self.blocks)?;
        let k = area.params.k;
        let count = self.block_count(brain)?;
        let mut hits = vec![0u32; count as usize];
        for &j in &response {
            hits[(j / k) as usize] += 1;
        }
        let (best, &top) = hits
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, &h)| h)
            .expect("at least one assembly");
        Ok((Some(best as BlockId + 1), top as f64 / k as f64))
    }
}

/// A chain in one register bank plus its symbolic shadow.
#[derive(Debug, Clone, PartialEq)]
pub struct StackRep {
    pub regs: StackRegisters,
    head_node: Option<usize>,
    head_assembly: Option<Assembly>,
    /// What the programs meant to store, top first.
    shadow: Vec<BlockId>,
}

impl StackRep {
    pub fn empty(regs: StackRegisters) -> Self {
        Self {
            regs,
            head_node: None,
            head_assembly: None,
            shadow: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.shadow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shadow.is_empty()
    }

    /// Node index linked from `Head`; `None` for an empty stack.
    pub fn head_node(&self) -> Option<usize> {
        self.head_node
    }

    pub fn head_assembly(&self) -> Option<&Assembly> {
        self.head_assembly.as_ref()
    }

    pub fn shadow(&self) -> &[BlockId] {
        &self.shadow
    }

    fn clear(&mut self) {
        self.head_node = None;
        self.head_assembly = None;
        self.shadow.clear();
    }
}

/// Result of parsing a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub rep: StackRep,
    /// Strong-projection rounds spent on each block.
    pub rounds: Vec<usize>,
}

/// Parses `stack` (top first) into the bank `regs`.
///
/// The first block binds `Blocks`, `Node0` and `Head`; block `i >= 2` binds
/// `Node_c` to `Blocks` and to the previous node `Node_p`, with
/// `p = (i-2) mod 3` and `c = (i-1) mod 3`.
pub fn parse_stack(brain: &mut Brain, regs: &StackRegisters, stack: &[BlockId], opts: &ProgramOptions) -> Result<Parsed, ReprError> {
    if stack.is_empty() {
        return Err(ReprError::EmptyInput);
    }
    for (i, &b) in stack.iter().enumerate() {
        regs.check_block(brain, b)?;
        if stack[..i].contains(&b) {
            return Err(ReprError::DuplicateBlock(b));
        }
    }
    regs.quiesce(brain)?;
    let [n0, _, _] = regs.nodes;
    let mut rounds = Vec::with_capacity(stack.len());

    let first_fibers = [(regs.head, n0), (n0, regs.blocks)];
    regs.open(brain, &[regs.blocks, regs.head, n0], &first_fibers, FiberDirection::Both)?;
    brain.activate_block(regs.blocks, stack[0])?;
    rounds.push(brain.strong_project(opts.strong)?.rounds);
    let head_assembly = Assembly {
        area: regs.head,
        neurons: brain.winners(regs.head).to_vec(),
    };
    regs.close(brain, &[regs.head], &first_fibers)?;

    for (i, &b) in stack.iter().enumerate().skip(1) {
        let prev = regs.nodes[(i - 1) % 3];
        let cur = regs.nodes[i % 3];
        let fibers = [(prev, cur), (cur, regs.blocks)];
        regs.open(brain, &[cur], &fibers, FiberDirection::Both)?;
        brain.activate_block(regs.blocks, b)?;
        rounds.push(brain.strong_project(opts.strong)?.rounds);
        regs.close(brain, &[prev], &fibers)?;
    }
    regs.close(brain, &[regs.blocks, regs.nodes[(stack.len() - 1) % 3]], &[])?;

    Ok(Parsed {
        rep: StackRep {
            regs: *regs,
            head_node: Some(0),
            head_assembly: Some(head_assembly),
            shadow: stack.to_vec(),
        },
        rounds,
    })
}

/// Decoded content of a chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Readout {
    /// Accepted blocks, top first.
    pub blocks: Vec<BlockId>,
    /// Decode overlap of every visited position, including a rejected last one.
    pub confidences: Vec<f64>,
    /// Whether each visited node assembly passed the strong-assembly probe.
    pub strong: Vec<bool>,
    /// Retrieval rounds spent.
    pub rounds: usize,
}

impl Readout {
    pub fn strong_count(&self) -> usize {
        self.strong.iter().filter(|&&s| s).count()
    }

    /// Length of the longest prefix of `truth` that was read back.
    pub fn correct_prefix(&self, truth: &[BlockId]) -> usize {
        self.blocks.iter().zip(truth).take_while(|(a, b)| a == b).count()
    }
}

/// Walks the chain from `Head`, decoding up to `max_len` blocks. Stops early
/// when a position decodes below the threshold. Plasticity is off and the
/// brain's winners and flags are restored afterwards.
pub fn readout(brain: &mut Brain, rep: &StackRep, max_len: usize, opts: &ProgramOptions) -> Result<Readout, ReprError> {
    let mut out = Readout::default();
    let (Some(mut node), Some(head)) = (rep.head_node, rep.head_assembly.as_ref()) else {
        return Ok(out);
    };
    let regs = &rep.regs;
    let snapshot = brain.save_activity();
    let result = (|| -> Result<(), ReprError> {
        brain.set_winners(regs.head, &head.neurons)?;
        let mut src = regs.head;
        for _ in 0..max_len {
            let dst = regs.nodes[node];
            brain.clear_winners(dst)?;
            out.rounds += brain.drive(src, dst, opts.retrieval).rounds;
            out.strong.push(brain.is_assembly(dst, opts.strong_threshold)?);
            let (block, confidence) = regs.decode(brain, dst)?;
            out.confidences.push(confidence);
            match block {
                Some(b) if confidence >= opts.decode_threshold => out.blocks.push(b),
                _ => break,
            }
            src = dst;
            node = (node + 1) % 3;
        }
        Ok(())
    })();
    brain.restore_activity(&snapshot);
    result.map(|()| out)
}

/// Outcome of a pop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Popped {
    /// Neurally decoded top block.
    pub block: BlockId,
    pub confidence: f64,
    pub rounds: usize,
}

/// Removes the top block.
///
/// The top is decoded first. The assembly below it is reached by projecting
/// `Head -> Node_h -> Node_(h+1)`, then a strong projection of that node with
/// `Head` binds a fresh head assembly. Old links stay in place. When `table`
/// is given the decoded block is appended to it.
pub fn pop_top(
    brain: &mut Brain,
    rep: &mut StackRep,
    table: Option<&mut TableRep>,
    opts: &ProgramOptions,
) -> Result<Popped, ReprError> {
    if rep.is_empty() {
        return Err(ReprError::EmptyStack);
    }
    let top = readout(brain, rep, 1, opts)?;
    let confidence = top.confidences.first().copied().unwrap_or(0.0);
    let Some(&block) = top.blocks.first() else {
        return Err(ReprError::DecodeFailure { confidence });
    };
    let mut rounds = top.rounds;

    if rep.len() == 1 {
        rep.clear();
    } else {
        let regs = rep.regs;
        let h = rep.head_node.expect("non-empty stack has a head node");
        let next = (h + 1) % 3;
        let (cur_node, next_node) = (regs.nodes[h], regs.nodes[next]);
        let head = rep.head_assembly.clone().expect("non-empty stack has a head");
        regs.quiesce(brain)?;
        brain.set_winners(regs.head, &head.neurons)?;
        rounds += brain.drive(regs.head, cur_node, opts.retrieval).rounds;
        rounds += brain.drive(cur_node, next_node, opts.retrieval).rounds;
        brain.clear_winners(regs.head)?;
        brain.clear_winners(cur_node)?;
        regs.open(brain, &[regs.head, next_node], &[(regs.head, next_node)], FiberDirection::Both)?;
        rounds += brain.strong_project(opts.strong)?.rounds;
        rep.head_assembly = Some(Assembly {
            area: regs.head,
            neurons: brain.winners(regs.head).to_vec(),
        });
        rep.head_node = Some(next);
        rep.shadow.remove(0);
        regs.quiesce(brain)?;
    }
    if let Some(table) = table {
        table.record(brain, block, opts)?;
    }
    Ok(Popped {
        block,
        confidence,
        rounds,
    })
}

/// Puts block `b` on top; returns the rounds spent.
///
/// `b` is projected from `Blocks` into the node preceding the current head
/// node, that assembly is projected into `Head`, and a strong projection of
/// `Blocks`, the new node, `Head` and the old top node binds them. On an
/// empty stack this restarts the chain exactly like the first parse step.
pub fn put_block(brain: &mut Brain, rep: &mut StackRep, b: BlockId, opts: &ProgramOptions) -> Result<usize, ReprError> {
    let regs = rep.regs;
    regs.check_block(brain, b)?;
    if rep.shadow.contains(&b) {
        return Err(ReprError::AlreadyInStack(b));
    }
    let Some(h) = rep.head_node else {
        let parsed = parse_stack(brain, &regs, &[b], opts)?;
        *rep = parsed.rep;
        return Ok(parsed.rounds.iter().sum());
    };
    let prev = (h + 2) % 3;
    let (old_node, new_node) = (regs.nodes[h], regs.nodes[prev]);
    let head = rep.head_assembly.clone().expect("non-empty stack has a head");
    let dir = opts.put_direction;
    let mut rounds = 0;

    regs.quiesce(brain)?;
    brain.set_winners(regs.head, &head.neurons)?;
    rounds += brain.drive(regs.head, old_node, opts.retrieval).rounds;
    brain.clear_winners(regs.head)?;

    regs.open(brain, &[regs.blocks, new_node], &[(regs.blocks, new_node)], FiberDirection::Both)?;
    brain.activate_block(regs.blocks, b)?;
    rounds += brain.project(regs.blocks, new_node, opts.project)?.rounds;

    regs.open(brain, &[regs.head], &[(new_node, regs.head)], FiberDirection::Both)?;
    rounds += brain.project(new_node, regs.head, opts.project)?.rounds;

    regs.open(brain, &[old_node], &[(new_node, old_node)], dir)?;
    rounds += brain.strong_project(opts.strong)?.rounds;

    rep.head_assembly = Some(Assembly {
        area: regs.head,
        neurons: brain.winners(regs.head).to_vec(),
    });
    rep.head_node = Some(prev);
    rep.shadow.insert(0, b);
    regs.quiesce(brain)?;
    Ok(rounds)
}

/// Chain of blocks moved to the table, kept in its own register bank.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRep {
    pub rep: StackRep,
}

impl TableRep {
    pub fn new(regs: StackRegisters) -> Self {
        Self {
            rep: StackRep::empty(regs),
        }
    }

    /// Appends `b` to the table chain; a block already recorded is skipped.
    pub fn record(&mut self, brain: &mut Brain, b: BlockId, opts: &ProgramOptions) -> Result<usize, ReprError> {
        if self.rep.shadow.contains(&b) {
            return Ok(0);
        }
        put_block(brain, &mut self.rep, b, opts)
    }
}

/// Common bottom sub-stack of two chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub height: usize,
    /// Highest block of the common sub-stack.
    pub top_common: Option<BlockId>,
    /// False when either chain could not be read to its full length.
    pub confident: bool,
}

/// Longest common suffix of two top-first sequences and its highest block.
pub fn common_suffix(a: &[BlockId], b: &[BlockId]) -> (usize, Option<BlockId>) {
    let height = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    let top = (height > 0).then(|| a[a.len() - height]);
    (height, top)
}

/// Compares two chains from the bottom up. Both are read out completely and
/// walked in reverse until they differ.
pub fn intersect(brain: &mut Brain, a: &StackRep, b: &StackRep, opts: &ProgramOptions) -> Result<Intersection, ReprError> {
    let ra = readout(brain, a, a.len(), opts)?;
    let rb = readout(brain, b, b.len(), opts)?;
    let confident = ra.blocks.len() == a.len() && rb.blocks.len() == b.len();
    let (height, top_common) = common_suffix(&ra.blocks, &rb.blocks);
    Ok(Intersection {
        height,
        top_common,
        confident,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: u32, k: u32, blocks: u32, seed: u64) -> (Brain, StackRegisters) {
        let mut brain = Brain::new(0.1, seed, 0.1).unwrap();
        let b = brain.add_explicit_area("Blocks", blocks, k).unwrap();
        let regs = StackRegisters::create(&mut brain, b, "S", n, k, 0.1).unwrap();
        (brain, regs)
    }

    #[test]
    fn common_suffix_examples() {
        assert_eq!(common_suffix(&[4, 5, 3, 1, 2], &[4, 1, 2]), (2, Some(1)));
        assert_eq!(common_suffix(&[4, 1, 2], &[4, 1, 2]), (3, Some(4)));
        assert_eq!(common_suffix(&[1, 2], &[2, 1]), (0, None));
        assert_eq!(common_suffix(&[], &[2, 1]), (0, None));
    }

    #[test]
    fn parse_rejects_bad_input() {
        let (mut brain, regs) = setup(1000, 10, 5, 1);
        let opts = ProgramOptions::default();
        assert_eq!(parse_stack(&mut brain, &regs, &[], &opts).unwrap_err(), ReprError::EmptyInput);
        assert_eq!(parse_stack(&mut brain, &regs, &[1, 2, 1], &opts).unwrap_err(), ReprError::DuplicateBlock(1));
        assert_eq!(
            parse_stack(&mut brain, &regs, &[1, 6], &opts).unwrap_err(),
            ReprError::UnknownBlock { block: 6, count: 5 }
        );
        assert!(parse_stack(&mut brain, &regs, &[0], &opts).is_err());
    }

    #[test]
    fn bank_has_five_areas_and_required_fibers() {
        let (brain, regs) = setup(1000, 10, 5, 1);
        assert_eq!(brain.areas().len(), 5);
        for i in 0..3 {
            assert!(brain.fiber(regs.head, regs.nodes[i]).is_some());
            assert!(brain.fiber(regs.nodes[i], regs.nodes[(i + 1) % 3]).is_some());
            assert!(brain.fiber(regs.nodes[i], regs.blocks).is_some());
        }
    }

    #[test]
    fn singleton_parse_links_node0() {
        let (mut brain, regs) = setup(10_000, 50, 8, 3);
        let opts = ProgramOptions::default();
        let parsed = parse_stack(&mut brain, &regs, &[7], &opts).unwrap();
        assert_eq!(parsed.rep.head_node(), Some(0));
        assert_eq!(parsed.rounds.len(), 1);
        assert_eq!(parsed.rep.head_assembly().unwrap().neurons.len(), 50);
        let r = readout(&mut brain, &parsed.rep, 1, &opts).unwrap();
        assert_eq!(r.blocks, vec![7]);
        // all bank areas left inhibited
        for a in brain.areas() {
            assert!(a.is_inhibited());
        }
    }

    #[test]
    fn empty_rep_reads_nothing_and_cannot_pop() {
        let (mut brain, regs) = setup(1000, 10, 3, 1);
        let mut rep = StackRep::empty(regs);
        let opts = ProgramOptions::default();
        assert!(readout(&mut brain, &rep, 5, &opts).unwrap().blocks.is_empty());
        assert_eq!(pop_top(&mut brain, &mut rep, None, &opts).unwrap_err(), ReprError::EmptyStack);
    }

    #[test]
    fn put_guards() {
        let (mut brain, regs) = setup(10_000, 50, 4, 2);
        let opts = ProgramOptions::default();
        let mut rep = parse_stack(&mut brain, &regs, &[2, 3], &opts).unwrap().rep;
        assert_eq!(put_block(&mut brain, &mut rep, 3, &opts).unwrap_err(), ReprError::AlreadyInStack(3));
        assert_eq!(
            put_block(&mut brain, &mut rep, 9, &opts).unwrap_err(),
            ReprError::UnknownBlock { block: 9, count: 4 }
        );
    }
}
