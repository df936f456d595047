//! Discrete-time simulation of brain areas.
//!
//! Every area holds `n` neurons of which exactly `k` fire per round (the cap).
//! Areas are wired by directed random bipartite graphs (fibers) and each
//! non-explicit area carries a recurrent random graph over its own neurons.
//! A synapse that carries a spike from a winner at round `t-1` into a winner at
//! round `t` is multiplied by `1 + beta` of the destination area.
//!
//! Synapses are sampled lazily: the outgoing edge set of a source neuron along
//! a fiber is drawn the first time that neuron fires across the fiber and is
//! frozen afterwards. Each row comes from its own random substream keyed by
//! `(seed, src area, dst area, neuron)`, so the order in which rows are
//! materialised never changes the graph.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

/// Handle of an area inside one [`Brain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AreaId(pub(crate) u32);

impl AreaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AreaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubstrateError {
    #[error("connection probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("plasticity rate must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("area `{0}` already exists")]
    DuplicateArea(String),
    #[error("area `{name}`: cap must satisfy 0 < k <= n (n={n}, k={k})")]
    InvalidCap { name: String, n: u32, k: u32 },
    #[error("explicit area `{0}` needs at least one assembly")]
    NoAssemblies(String),
    #[error("unknown area {0}")]
    UnknownArea(AreaId),
    #[error("no fiber from {0} to {1}")]
    UnknownFiber(AreaId, AreaId),
    #[error("area {0} cannot be connected to itself; recurrent edges are implicit")]
    SelfConnection(AreaId),
    #[error("winner set for area {area} must hold exactly {k} distinct neurons below {n}")]
    InvalidWinners { area: AreaId, n: u32, k: u32 },
}

/// Size, cap and plasticity rate of an area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaParams {
    pub n: u32,
    pub k: u32,
    pub beta: f64,
}

impl AreaParams {
    pub fn new(n: u32, k: u32, beta: f64) -> Self {
        Self { n, k, beta }
    }

    fn validate(&self, name: &str) -> Result<(), SubstrateError> {
        if self.k == 0 || self.k > self.n {
            return Err(SubstrateError::InvalidCap {
                name: name.to_string(),
                n: self.n,
                k: self.k,
            });
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(SubstrateError::InvalidBeta(self.beta));
        }
        Ok(())
    }
}

/// A set of exactly `k` neurons of one area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub area: AreaId,
    /// Sorted ascending.
    pub neurons: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Area {
    pub id: AreaId,
    pub name: String,
    pub params: AreaParams,
    winners: Vec<u32>,
    inhibited: bool,
    explicit_assemblies: Option<u32>,
    /// `ladder[m] = (1 + beta)^m`, built by repeated multiplication.
    ladder: Vec<f64>,
    quiescent_fills: u64,
}

impl Area {
    /// Current winners, sorted ascending. Empty when the area is quiescent.
    pub fn winners(&self) -> &[u32] {
        &self.winners
    }

    pub fn is_inhibited(&self) -> bool {
        self.inhibited
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit_assemblies.is_some()
    }

    /// Number of fixed assemblies of an explicit area.
    pub fn explicit_count(&self) -> Option<u32> {
        self.explicit_assemblies
    }

    /// Neuron range of explicit assembly `index` (0-based).
    pub fn explicit_assembly(&self, index: u32) -> Option<std::ops::Range<u32>> {
        let count = self.explicit_assemblies?;
        (index < count).then(|| index * self.params.k..(index + 1) * self.params.k)
    }

    /// Times this area picked winners from an all-zero input.
    pub fn quiescent_fills(&self) -> u64 {
        self.quiescent_fills
    }

    pub fn weight_of(&self, potentiations: u16) -> f64 {
        self.ladder[potentiations as usize]
    }
}

fn build_ladder(beta: f64) -> Vec<f64> {
    let factor = 1.0 + beta;
    let mut ladder = Vec::with_capacity(1024);
    let mut w = 1.0f64;
    ladder.push(w);
    while ladder.len() < u16::MAX as usize {
        w *= factor;
        if !w.is_finite() {
            break;
        }
        ladder.push(w);
    }
    ladder
}

/// Portable edge sampler shared by every fiber of a brain.
///
/// Candidate target `j` of a row is present iff the `j`-th 32-bit word of the
/// row's Xoshiro256++ substream (low half of each `u64` first) is below
/// `round(p * 2^32)`. This is a Bernoulli(p) draw per candidate, so the row
/// size is Binomial(n_dst, p) and the targets are uniform without replacement.
#[derive(Debug, Clone, Copy)]
pub struct EdgeSampler {
    seed: u64,
    threshold: u64,
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Chains `parts` through splitmix64 into one 64-bit key.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_0F_A55E_B1E5u64, |acc, &x| splitmix64(acc ^ x))
}

impl EdgeSampler {
    pub fn new(seed: u64, p: f64) -> Self {
        let threshold = (p * 4_294_967_296.0).round() as u64;
        Self { seed, threshold }
    }

    /// Sorted targets of `neuron`'s row along the fiber `src -> dst`.
    pub fn row(&self, src: AreaId, dst: AreaId, neuron: u32, n_dst: u32) -> Vec<u32> {
        if self.threshold == 0 {
            return Vec::new();
        }
        if self.threshold >= 1 << 32 {
            return (0..n_dst).collect();
        }
        let key = mix_seed(&[self.seed, src.0 as u64, dst.0 as u64, neuron as u64]);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(key);
        let expected = (n_dst as f64 * self.threshold as f64 / 4_294_967_296.0) as usize;
        let mut targets = Vec::with_capacity(expected + expected / 8 + 16);
        let t = self.threshold;
        let mut j = 0u32;
        while j < n_dst {
            let word = rng.next_u64();
            if (word & 0xFFFF_FFFF) < t {
                targets.push(j);
            }
            if j + 1 < n_dst && (word >> 32) < t {
                targets.push(j + 1);
            }
            j = j.saturating_add(2);
        }
        targets
    }
}

/// One sampled source row: sorted targets stored as byte gaps, plus the
/// potentiation counts of the few edges that have been strengthened.
///
/// A gap byte `g < 255` places the next target `g` positions after the
/// previous one (plus one); `255` skips 255 positions without a target.
#[derive(Debug, Clone, Default)]
pub(crate) struct SynapseRow {
    gaps: Vec<u8>,
    len: u32,
    /// Every `SKIP`-th target and the byte offset just past it.
    skip: Vec<(u32, u32)>,
    /// Sorted by target.
    potentiated: Vec<(u32, u16)>,
}

const SKIP: usize = 64;

impl SynapseRow {
    fn from_targets(targets: &[u32]) -> Self {
        let mut gaps = Vec::with_capacity(targets.len() + targets.len() / 64);
        let mut skip = Vec::with_capacity(targets.len() / SKIP + 1);
        let mut next = 0u32;
        for (idx, &j) in targets.iter().enumerate() {
            let mut d = j - next;
            while d >= 255 {
                gaps.push(255);
                d -= 255;
            }
            gaps.push(d as u8);
            next = j + 1;
            if idx % SKIP == 0 {
                skip.push((j, gaps.len() as u32));
            }
        }
        Self {
            gaps,
            len: targets.len() as u32,
            skip,
            potentiated: Vec::new(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len as usize
    }

    /// Targets in ascending order.
    pub(crate) fn iter(&self) -> GapIter<'_> {
        GapIter {
            bytes: &self.gaps,
            pos: 0,
            next: 0,
        }
    }

    /// `(target, potentiations)` in ascending target order.
    pub(crate) fn weighted(&self) -> impl Iterator<Item = (u32, u16)> + '_ {
        let mut pot = self.potentiated.iter().peekable();
        self.iter().map(move |j| match pot.peek() {
            Some(&&(t, c)) if t == j => {
                pot.next();
                (j, c)
            }
            _ => (j, 0),
        })
    }

    pub(crate) fn contains(&self, j: u32) -> bool {
        let start = self.skip.partition_point(|&(t, _)| t <= j);
        if start == 0 {
            return false;
        }
        let (t, offset) = self.skip[start - 1];
        if t == j {
            return true;
        }
        let mut it = GapIter {
            bytes: &self.gaps,
            pos: offset as usize,
            next: t + 1,
        };
        it.find(|&x| x >= j) == Some(j)
    }

    pub(crate) fn count(&self, j: u32) -> u16 {
        self.potentiated
            .binary_search_by_key(&j, |&(t, _)| t)
            .map_or(0, |idx| self.potentiated[idx].1)
    }

    /// Adds one potentiation to edge `-> j` if it exists, saturating at `cap`.
    pub(crate) fn potentiate(&mut self, j: u32, cap: u16) {
        match self.potentiated.binary_search_by_key(&j, |&(t, _)| t) {
            Ok(idx) => {
                let c = &mut self.potentiated[idx].1;
                *c = (*c + 1).min(cap);
            }
            Err(idx) => {
                if cap > 0 && self.contains(j) {
                    self.potentiated.insert(idx, (j, 1));
                }
            }
        }
    }
}

pub(crate) struct GapIter<'a> {
    bytes: &'a [u8],
    pos: usize,
    next: u32,
}

impl Iterator for GapIter<'_> {
    type Item = u32;

    #[inline]
    fn next(&mut self) -> Option<u32> {
        let mut acc = 0u32;
        while let Some(&b) = self.bytes.get(self.pos) {
            self.pos += 1;
            if b == 255 {
                acc += 255;
            } else {
                let j = self.next + acc + b as u32;
                self.next = j + 1;
                return Some(j);
            }
        }
        None
    }
}

/// Directed connection between two areas (or an area and itself).
#[derive(Debug, Clone)]
pub struct Fiber {
    pub src: AreaId,
    pub dst: AreaId,
    inhibited: bool,
    rows: HashMap<u32, SynapseRow>,
}

impl Fiber {
    fn new(src: AreaId, dst: AreaId, inhibited: bool) -> Self {
        Self {
            src,
            dst,
            inhibited,
            rows: HashMap::new(),
        }
    }

    pub fn is_inhibited(&self) -> bool {
        self.inhibited
    }

    pub fn is_recurrent(&self) -> bool {
        self.src == self.dst
    }

    /// Whether the outgoing edges of `neuron` have been drawn.
    pub fn is_sampled(&self, neuron: u32) -> bool {
        self.rows.contains_key(&neuron)
    }

    pub fn sampled_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn stored_edges(&self) -> usize {
        self.rows.values().map(SynapseRow::len).sum()
    }

    /// Approximate heap bytes held by the sampled rows.
    pub fn stored_bytes(&self) -> usize {
        self.rows
            .values()
            .map(|r| r.gaps.capacity() + r.skip.capacity() * 8 + r.potentiated.capacity() * 8 + 64)
            .sum()
    }

    /// Sorted targets of a sampled row.
    pub fn targets(&self, neuron: u32) -> Option<Vec<u32>> {
        self.rows.get(&neuron).map(|r| r.iter().collect())
    }

    /// Potentiation count of edge `i -> j`; `None` if the row is unsampled or
    /// the edge is absent.
    pub fn potentiations(&self, i: u32, j: u32) -> Option<u16> {
        let row = self.rows.get(&i)?;
        row.contains(j).then(|| row.count(j))
    }

    /// Iterates `(source, target, potentiations)` over all stored edges.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, u16)> + '_ {
        self.rows
            .iter()
            .flat_map(|(&i, row)| row.weighted().map(move |(j, c)| (i, j, c)))
    }

    fn ensure_row(&mut self, sampler: &EdgeSampler, neuron: u32, n_dst: u32) {
        let (src, dst) = (self.src, self.dst);
        self.rows
            .entry(neuron)
            .or_insert_with(|| SynapseRow::from_targets(&sampler.row(src, dst, neuron, n_dst)));
    }
}

/// Which directions of an area pair a fiber (dis)inhibition touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FiberDirection {
    #[default]
    Both,
    Forward,
}

/// One area to be recomputed in a round, with the areas feeding it.
#[derive(Debug, Clone)]
pub(crate) struct Target {
    pub(crate) area: AreaId,
    /// Sorted ascending; includes `area` itself for recurrent input.
    pub(crate) sources: Vec<AreaId>,
    /// Clamped areas keep their winners but still receive plasticity.
    pub(crate) clamped: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RoundConfig {
    pub(crate) plasticity: bool,
    /// Leave an area with all-zero input quiescent instead of filling its
    /// winners by tie-break.
    pub(crate) keep_silent: bool,
}

/// Outcome of a single [`Brain::step`].
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    /// New winners of every area that was recomputed or clamped this round.
    pub winners: BTreeMap<AreaId, Vec<u32>>,
    /// Areas whose winners were chosen from an all-zero input.
    pub quiescent: Vec<AreaId>,
}

#[derive(Debug, Clone)]
pub(crate) struct RoundResult {
    pub(crate) area: AreaId,
    pub(crate) previous: Vec<u32>,
    pub(crate) current: Vec<u32>,
    pub(crate) clamped: bool,
    pub(crate) quiescent: bool,
}

/// Winner sets and inhibition flags, for probes that must leave the brain as
/// they found it.
#[derive(Debug, Clone)]
pub struct ActivitySnapshot {
    winners: Vec<Vec<u32>>,
    area_inhibited: Vec<bool>,
    fiber_inhibited: Vec<((AreaId, AreaId), bool)>,
}

/// The whole simulated substrate.
#[derive(Debug, Clone)]
pub struct Brain {
    p: f64,
    seed: u64,
    default_beta: f64,
    sampler: EdgeSampler,
    areas: Vec<Area>,
    names: HashMap<String, AreaId>,
    /// Keyed by `(src, dst)`; recurrent fibers are `(a, a)`.
    fibers: BTreeMap<(AreaId, AreaId), Fiber>,
    /// Sorted source ids per destination, recurrent included.
    incoming: Vec<Vec<AreaId>>,
    step_counter: u64,
    scratch: Vec<f64>,
}

impl Brain {
    pub fn new(p: f64, seed: u64, default_beta: f64) -> Result<Self, SubstrateError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SubstrateError::InvalidProbability(p));
        }
        if !(default_beta > 0.0) || !default_beta.is_finite() {
            return Err(SubstrateError::InvalidBeta(default_beta));
        }
        Ok(Self {
            p,
            seed,
            default_beta,
            sampler: EdgeSampler::new(seed, p),
            areas: Vec::new(),
            names: HashMap::new(),
            fibers: BTreeMap::new(),
            incoming: Vec::new(),
            step_counter: 0,
            scratch: Vec::new(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn default_beta(&self) -> f64 {
        self.default_beta
    }

    pub fn sampler(&self) -> EdgeSampler {
        self.sampler
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn areas(&self) -> &[Area] {
        &self.areas
    }

    pub fn area(&self, id: AreaId) -> Result<&Area, SubstrateError> {
        self.areas
            .get(id.index())
            .ok_or(SubstrateError::UnknownArea(id))
    }

    fn area_mut(&mut self, id: AreaId) -> Result<&mut Area, SubstrateError> {
        self.areas
            .get_mut(id.index())
            .ok_or(SubstrateError::UnknownArea(id))
    }

    pub fn area_id(&self, name: &str) -> Option<AreaId> {
        self.names.get(name).copied()
    }

    pub fn winners(&self, id: AreaId) -> &[u32] {
        &self.areas[id.index()].winners
    }

    pub fn fiber(&self, src: AreaId, dst: AreaId) -> Option<&Fiber> {
        self.fibers.get(&(src, dst))
    }

    pub fn fibers(&self) -> impl Iterator<Item = &Fiber> {
        self.fibers.values()
    }

    /// Current weight of `i -> j` along `src -> dst`, if that edge is known.
    pub fn weight(&self, src: AreaId, dst: AreaId, i: u32, j: u32) -> Option<f64> {
        let m = self.fiber(src, dst)?.potentiations(i, j)?;
        Some(self.areas[dst.index()].weight_of(m))
    }

    /// Total edges held in sampled rows across all fibers.
    pub fn stored_edges(&self) -> usize {
        self.fibers.values().map(Fiber::stored_edges).sum()
    }

    fn register(&mut self, name: &str, params: AreaParams, explicit: Option<u32>) -> AreaId {
        let id = AreaId(self.areas.len() as u32);
        self.areas.push(Area {
            id,
            name: name.to_string(),
            params,
            winners: Vec::new(),
            inhibited: true,
            explicit_assemblies: explicit,
            ladder: build_ladder(params.beta),
            quiescent_fills: 0,
        });
        self.names.insert(name.to_string(), id);
        self.incoming.push(Vec::new());
        id
    }

    fn insert_fiber(&mut self, src: AreaId, dst: AreaId, inhibited: bool) {
        self.fibers.insert((src, dst), Fiber::new(src, dst, inhibited));
        let list = &mut self.incoming[dst.index()];
        if let Err(pos) = list.binary_search(&src) {
            list.insert(pos, src);
        }
    }

    /// Adds an ordinary area. It starts inhibited with no winners.
    pub fn add_area(&mut self, name: &str, n: u32, k: u32, beta: f64) -> Result<AreaId, SubstrateError> {
        if self.names.contains_key(name) {
            return Err(SubstrateError::DuplicateArea(name.to_string()));
        }
        let params = AreaParams::new(n, k, beta);
        params.validate(name)?;
        let id = self.register(name, params, None);
        // The recurrent fiber is never user-inhibited.
        self.insert_fiber(id, id, false);
        Ok(id)
    }

    /// Adds an area of `num_assemblies` fixed, disjoint assemblies; assembly
    /// `i` (0-based) is neurons `[i*k, (i+1)*k)`. No recurrent edges.
    pub fn add_explicit_area(&mut self, name: &str, num_assemblies: u32, k: u32) -> Result<AreaId, SubstrateError> {
        if self.names.contains_key(name) {
            return Err(SubstrateError::DuplicateArea(name.to_string()));
        }
        if num_assemblies == 0 {
            return Err(SubstrateError::NoAssemblies(name.to_string()));
        }
        let n = num_assemblies
            .checked_mul(k)
            .ok_or_else(|| SubstrateError::InvalidCap { name: name.to_string(), n: u32::MAX, k })?;
        let params = AreaParams::new(n, k, self.default_beta);
        params.validate(name)?;
        Ok(self.register(name, params, Some(num_assemblies)))
    }

    /// Registers both fibers `a -> b` and `b -> a`, inhibited. Returns `false`
    /// if the pair was already connected (nothing changes in that case).
    pub fn connect(&mut self, a: AreaId, b: AreaId) -> Result<bool, SubstrateError> {
        self.area(a)?;
        self.area(b)?;
        if a == b {
            return Err(SubstrateError::SelfConnection(a));
        }
        if self.fibers.contains_key(&(a, b)) {
            return Ok(false);
        }
        self.insert_fiber(a, b, true);
        self.insert_fiber(b, a, true);
        Ok(true)
    }

    /// Inhibiting an area silences it immediately.
    pub fn set_area_inhibition(&mut self, area: AreaId, inhibited: bool) -> Result<(), SubstrateError> {
        let a = self.area_mut(area)?;
        a.inhibited = inhibited;
        if inhibited {
            a.winners.clear();
        }
        Ok(())
    }

    pub fn set_fiber_inhibition(
        &mut self,
        a: AreaId,
        b: AreaId,
        inhibited: bool,
        direction: FiberDirection,
    ) -> Result<(), SubstrateError> {
        if a == b {
            return Err(SubstrateError::SelfConnection(a));
        }
        let forward = self
            .fibers
            .get_mut(&(a, b))
            .ok_or(SubstrateError::UnknownFiber(a, b))?;
        forward.inhibited = inhibited;
        if direction == FiberDirection::Both {
            let backward = self
                .fibers
                .get_mut(&(b, a))
                .ok_or(SubstrateError::UnknownFiber(b, a))?;
            backward.inhibited = inhibited;
        }
        Ok(())
    }

    /// Forces the winners of `area` (any area, explicit or not).
    pub fn set_winners(&mut self, area: AreaId, neurons: &[u32]) -> Result<(), SubstrateError> {
        let a = self.area_mut(area)?;
        let mut sorted = neurons.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let (n, k) = (a.params.n, a.params.k);
        if sorted.len() != k as usize || sorted.last().is_some_and(|&x| x >= n) {
            return Err(SubstrateError::InvalidWinners { area, n, k });
        }
        a.winners = sorted;
        Ok(())
    }

    pub fn clear_winners(&mut self, area: AreaId) -> Result<(), SubstrateError> {
        self.area_mut(area)?.winners.clear();
        Ok(())
    }

    pub fn save_activity(&self) -> ActivitySnapshot {
        ActivitySnapshot {
            winners: self.areas.iter().map(|a| a.winners.clone()).collect(),
            area_inhibited: self.areas.iter().map(|a| a.inhibited).collect(),
            fiber_inhibited: self.fibers.iter().map(|(&key, f)| (key, f.inhibited)).collect(),
        }
    }

    /// Restores winners and flags. Weights are not part of the snapshot.
    pub fn restore_activity(&mut self, snapshot: &ActivitySnapshot) {
        for (area, (winners, inhibited)) in self
            .areas
            .iter_mut()
            .zip(snapshot.winners.iter().zip(&snapshot.area_inhibited))
        {
            area.winners.clone_from(winners);
            area.inhibited = *inhibited;
        }
        for (key, inhibited) in &snapshot.fiber_inhibited {
            if let Some(f) = self.fibers.get_mut(key) {
                f.inhibited = *inhibited;
            }
        }
    }

    /// Sources feeding `dst` under the current flags: disinhibited fibers from
    /// disinhibited areas that fired last round, plus recurrence if `dst` fired.
    pub(crate) fn active_sources(&self, dst: AreaId) -> Vec<AreaId> {
        self.incoming[dst.index()]
            .iter()
            .copied()
            .filter(|&src| {
                let area = &self.areas[src.index()];
                if area.winners.is_empty() {
                    return false;
                }
                if src == dst {
                    return true;
                }
                !area.inhibited && !self.fibers[&(src, dst)].inhibited
            })
            .collect()
    }

    /// Round plan for every disinhibited area under the current flags.
    pub(crate) fn flag_targets(&self) -> Vec<Target> {
        self.areas
            .iter()
            .filter(|a| !a.inhibited)
            .filter_map(|a| {
                let sources = self.active_sources(a.id);
                if a.is_explicit() {
                    (!a.winners.is_empty() && !sources.is_empty()).then(|| Target {
                        area: a.id,
                        sources,
                        clamped: true,
                    })
                } else {
                    Some(Target {
                        area: a.id,
                        sources,
                        clamped: false,
                    })
                }
            })
            .collect()
    }

    /// One synchronous round of the dynamics under the current flags.
    ///
    /// Every disinhibited area takes the `k` neurons of highest total input as
    /// its new winners (lowest index wins ties); an all-zero input therefore
    /// yields `0..k` and is reported in [`StepOutcome::quiescent`]. Explicit
    /// areas keep their clamped winners. Plasticity is applied to every fiber
    /// that carried input.
    pub fn step(&mut self) -> StepOutcome {
        let targets = self.flag_targets();
        let results = self.run_round(
            &targets,
            RoundConfig {
                plasticity: true,
                keep_silent: false,
            },
            true,
        );
        // Inhibited areas hold no winners after a step.
        for area in self.areas.iter_mut().filter(|a| a.inhibited) {
            area.winners.clear();
        }
        let mut outcome = StepOutcome::default();
        for r in results {
            if r.quiescent {
                outcome.quiescent.push(r.area);
            }
            outcome.winners.insert(r.area, r.current);
        }
        outcome
    }

    /// Computes new winners for `targets` from the current winners, then (if
    /// `commit`) applies plasticity and installs them.
    pub(crate) fn run_round(&mut self, targets: &[Target], cfg: RoundConfig, commit: bool) -> Vec<RoundResult> {
        // Materialise every row this round reads.
        for t in targets {
            let n_dst = self.areas[t.area.index()].params.n;
            for &src in &t.sources {
                let fiber = self.fibers.get_mut(&(src, t.area)).expect("planned fiber exists");
                for &i in &self.areas[src.index()].winners {
                    fiber.ensure_row(&self.sampler, i, n_dst);
                }
            }
        }

        let mut scratch = std::mem::take(&mut self.scratch);
        let mut results = Vec::with_capacity(targets.len());
        for t in targets {
            let area = &self.areas[t.area.index()];
            let previous = area.winners.clone();
            if t.clamped {
                results.push(RoundResult {
                    area: t.area,
                    current: previous.clone(),
                    previous,
                    clamped: true,
                    quiescent: false,
                });
                continue;
            }
            let n = area.params.n as usize;
            let k = area.params.k as usize;
            scratch.clear();
            scratch.resize(n, 0.0);
            for &src in &t.sources {
                let fiber = &self.fibers[&(src, t.area)];
                for i in &self.areas[src.index()].winners {
                    let row = &fiber.rows[i];
                    if row.potentiated.is_empty() {
                        for j in row.iter() {
                            scratch[j as usize] += 1.0;
                        }
                    } else {
                        for (j, c) in row.weighted() {
                            scratch[j as usize] += area.ladder[c as usize];
                        }
                    }
                }
            }
            let silent = scratch.iter().all(|&x| x == 0.0);
            let current = if silent && cfg.keep_silent {
                Vec::new()
            } else {
                top_k(&scratch, k)
            };
            results.push(RoundResult {
                area: t.area,
                previous,
                current,
                clamped: false,
                quiescent: silent && !cfg.keep_silent,
            });
        }
        self.scratch = scratch;

        if commit {
            if cfg.plasticity {
                for (t, r) in targets.iter().zip(&results) {
                    let cap = (self.areas[t.area.index()].ladder.len() - 1) as u16;
                    for &src in &t.sources {
                        let fired = &self.areas[src.index()].winners;
                        let fiber = self.fibers.get_mut(&(src, t.area)).expect("planned fiber exists");
                        for i in fired {
                            let row = fiber.rows.get_mut(i).expect("row sampled above");
                            for &j in &r.current {
                                row.potentiate(j, cap);
                            }
                        }
                    }
                }
            }
            for r in &results {
                let area = &mut self.areas[r.area.index()];
                if r.quiescent {
                    area.quiescent_fills += 1;
                }
                area.winners.clone_from(&r.current);
            }
            self.step_counter += 1;
        }
        results
    }
}

/// Indices of the `k` largest entries of `input`, lowest index first among
/// equals, returned in ascending order.
pub fn top_k(input: &[f64], k: usize) -> Vec<u32> {
    let k = k.min(input.len());
    let mut candidates: Vec<u32> = (0..input.len() as u32).filter(|&j| input[j as usize] > 0.0).collect();
    let mut winners = if candidates.len() > k {
        let by_rank = |a: &u32, b: &u32| {
            input[*b as usize]
                .total_cmp(&input[*a as usize])
                .then(a.cmp(b))
        };
        if k > 0 {
            candidates.select_nth_unstable_by(k - 1, by_rank);
        }
        candidates.truncate(k);
        candidates
    } else {
        // Everyone with positive input wins; zero-input neurons fill the rest
        // by index.
        let mut j = 0u32;
        let mut positive = candidates.iter().peekable();
        let mut filled = candidates.clone();
        while filled.len() < k {
            if positive.peek() == Some(&&j) {
                positive.next();
            } else {
                filled.push(j);
            }
            j += 1;
        }
        filled
    };
    winners.sort_unstable();
    winners
}

/// `|x ∩ y| / max(|x|, 1)`.
pub fn overlap(x: &[u32], y: &[u32]) -> f64 {
    let shared = if x.is_sorted() && y.is_sorted() {
        let (mut a, mut b, mut shared) = (0, 0, 0usize);
        while a < x.len() && b < y.len() {
            match x[a].cmp(&y[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        shared
    } else {
        let ys: std::collections::HashSet<u32> = y.iter().copied().collect();
        let xs: std::collections::HashSet<u32> = x.iter().copied().collect();
        xs.intersection(&ys).count()
    };
    shared as f64 / x.len().max(1) as f64
}
