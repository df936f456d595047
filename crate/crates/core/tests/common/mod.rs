//! Eager dense reference for the substrate, used as a test oracle.
//!
//! Every fiber is a full `n_src x n_dst` weight matrix drawn up front from the
//! same per-row edge sampler the lazy brain uses. The round dynamics are
//! written out directly from the model definition: sum the weights from every
//! live source winner, rank all neurons by (input desc, index asc), take `k`,
//! multiply weights of fired pairs by `1 + beta_dst`.

#![allow(dead_code)]

use acblocks::{AreaId, Brain, FiberDirection};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct DenseArea {
    pub id: AreaId,
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub explicit: bool,
    pub inhibited: bool,
    pub winners: Vec<u32>,
}

pub struct DenseFiber {
    pub src: AreaId,
    pub dst: AreaId,
    pub inhibited: bool,
    /// Row-major `[i * n_dst + j]`; 0.0 means no edge.
    pub w: Vec<f64>,
}

pub struct DenseBrain {
    pub areas: Vec<DenseArea>,
    /// Sorted by `(src, dst)`.
    pub fibers: Vec<DenseFiber>,
}

impl DenseBrain {
    /// Copies structure, flags and winners of a brain that has not stepped yet.
    pub fn mirror(brain: &Brain) -> Self {
        let sampler = brain.sampler();
        let areas: Vec<DenseArea> = brain
            .areas()
            .iter()
            .map(|a| DenseArea {
                id: a.id,
                n: a.params.n as usize,
                k: a.params.k as usize,
                beta: a.params.beta,
                explicit: a.is_explicit(),
                inhibited: a.is_inhibited(),
                winners: a.winners().to_vec(),
            })
            .collect();
        let mut fibers: Vec<DenseFiber> = brain
            .fibers()
            .map(|f| {
                let n_src = areas[f.src.index()].n;
                let n_dst = areas[f.dst.index()].n;
                let mut w = vec![0.0; n_src * n_dst];
                for i in 0..n_src {
                    for j in sampler.row(f.src, f.dst, i as u32, n_dst as u32) {
                        w[i * n_dst + j as usize] = 1.0;
                    }
                }
                DenseFiber {
                    src: f.src,
                    dst: f.dst,
                    inhibited: f.is_inhibited(),
                    w,
                }
            })
            .collect();
        fibers.sort_by_key(|f| (f.src, f.dst));
        Self { areas, fibers }
    }

    pub fn fiber_mut(&mut self, src: AreaId, dst: AreaId) -> &mut DenseFiber {
        self.fibers.iter_mut().find(|f| f.src == src && f.dst == dst).unwrap()
    }

    pub fn fiber(&self, src: AreaId, dst: AreaId) -> &DenseFiber {
        self.fibers.iter().find(|f| f.src == src && f.dst == dst).unwrap()
    }

    pub fn set_area_inhibition(&mut self, a: AreaId, inhibited: bool) {
        let area = &mut self.areas[a.index()];
        area.inhibited = inhibited;
        if inhibited {
            area.winners.clear();
        }
    }

    pub fn set_fiber_inhibition(&mut self, a: AreaId, b: AreaId, inhibited: bool, both: bool) {
        self.fiber_mut(a, b).inhibited = inhibited;
        if both {
            self.fiber_mut(b, a).inhibited = inhibited;
        }
    }

    pub fn set_winners(&mut self, a: AreaId, neurons: &[u32]) {
        let mut w = neurons.to_vec();
        w.sort_unstable();
        self.areas[a.index()].winners = w;
    }

    /// Indices of fibers feeding `dst` this round, in source order.
    fn live_sources(&self, dst: AreaId) -> Vec<usize> {
        (0..self.fibers.len())
            .filter(|&f| {
                let fiber = &self.fibers[f];
                if fiber.dst != dst {
                    return false;
                }
                let src = &self.areas[fiber.src.index()];
                if src.winners.is_empty() {
                    return false;
                }
                fiber.src == dst || (!fiber.inhibited && !src.inhibited)
            })
            .collect()
    }

    pub fn step(&mut self) {
        // (area, live fibers, new winners)
        let mut updates: Vec<(usize, Vec<usize>, Vec<u32>)> = Vec::new();
        for (a, area) in self.areas.iter().enumerate() {
            if area.inhibited {
                continue;
            }
            let live = self.live_sources(area.id);
            if area.explicit {
                if !area.winners.is_empty() && !live.is_empty() {
                    updates.push((a, live, area.winners.clone()));
                }
                continue;
            }
            let mut input = vec![0.0f64; area.n];
            for j in 0..area.n {
                for &f in &live {
                    let fiber = &self.fibers[f];
                    for &i in &self.areas[fiber.src.index()].winners {
                        input[j] += fiber.w[i as usize * area.n + j];
                    }
                }
            }
            let mut order: Vec<usize> = (0..area.n).collect();
            order.sort_by(|&x, &y| input[y].partial_cmp(&input[x]).unwrap().then(x.cmp(&y)));
            let mut winners: Vec<u32> = order[..area.k].iter().map(|&j| j as u32).collect();
            winners.sort_unstable();
            updates.push((a, live, winners));
        }
        for (a, live, winners) in &updates {
            let n_dst = self.areas[*a].n;
            let factor = 1.0 + self.areas[*a].beta;
            for &f in live {
                let fired = self.areas[self.fibers[f].src.index()].winners.clone();
                for &i in &fired {
                    for &j in winners {
                        let w = &mut self.fibers[f].w[i as usize * n_dst + j as usize];
                        if *w > 0.0 {
                            *w *= factor;
                        }
                    }
                }
            }
        }
        for (a, _, winners) in updates {
            self.areas[a].winners = winners;
        }
        for area in &mut self.areas {
            if area.inhibited {
                area.winners.clear();
            }
        }
    }
}

pub struct Rig {
    pub brain: Brain,
    pub stim: AreaId,
    pub areas: Vec<AreaId>,
    pub pairs: Vec<(AreaId, AreaId)>,
}

pub fn rig(seed: u64, p: f64, beta: f64) -> Rig {
    let mut brain = Brain::new(p, seed, beta).unwrap();
    let stim = brain.add_explicit_area("S", 4, 10).unwrap();
    let a = brain.add_area("A", 300, 15, beta).unwrap();
    let b = brain.add_area("B", 500, 20, beta * 2.0).unwrap();
    let c = brain.add_area("C", 1000, 30, beta).unwrap();
    let pairs = vec![(stim, a), (a, b), (b, c), (stim, c), (a, c)];
    for &(x, y) in &pairs {
        brain.connect(x, y).unwrap();
    }
    Rig {
        brain,
        stim,
        areas: vec![a, b, c],
        pairs,
    }
}

/// Random control ops applied to both brains, one step after each; panics
/// on the first disagreement.
pub fn compare_random_run(seed: u64, steps: usize) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let p = [0.05, 0.1, 0.3][seed as usize % 3];
    let beta = [0.1, 0.5][seed as usize % 2];
    let Rig {
        mut brain,
        stim,
        areas,
        pairs,
    } = rig(seed, p, beta);
    brain.set_area_inhibition(stim, false).unwrap();
    for &a in &areas {
        brain.set_area_inhibition(a, false).unwrap();
    }
    for &(x, y) in &pairs {
        brain.set_fiber_inhibition(x, y, false, FiberDirection::Both).unwrap();
    }
    brain.activate_block(stim, 1).unwrap();
    let mut dense = DenseBrain::mirror(&brain);

    for step in 0..steps {
        match rng.gen_range(0..10) {
            0 => {
                let b = rng.gen_range(1..=4);
                brain.activate_block(stim, b).unwrap();
                let w: Vec<u32> = brain.winners(stim).to_vec();
                dense.set_winners(stim, &w);
            }
            1 => {
                let a = areas[rng.gen_range(0..areas.len())];
                let inhibited = rng.gen_bool(0.4);
                brain.set_area_inhibition(a, inhibited).unwrap();
                dense.set_area_inhibition(a, inhibited);
            }
            2 => {
                let (x, y) = pairs[rng.gen_range(0..pairs.len())];
                let inhibited = rng.gen_bool(0.4);
                let both = rng.gen_bool(0.5);
                let dir = if both { FiberDirection::Both } else { FiberDirection::Forward };
                brain.set_fiber_inhibition(x, y, inhibited, dir).unwrap();
                dense.set_fiber_inhibition(x, y, inhibited, both);
            }
            3 => {
                let a = areas[rng.gen_range(0..areas.len())];
                let area = brain.area(a).unwrap();
                let (n, k) = (area.params.n, area.params.k);
                let mut w: Vec<u32> = Vec::new();
                while w.len() < k as usize {
                    let x = rng.gen_range(0..n);
                    if !w.contains(&x) {
                        w.push(x);
                    }
                }
                brain.set_winners(a, &w).unwrap();
                dense.set_winners(a, &w);
            }
            _ => {}
        }
        brain.step();
        dense.step();
        for area in &dense.areas {
            assert_eq!(
                brain.winners(area.id),
                area.winners.as_slice(),
                "seed {seed} step {step} area {}",
                area.id
            );
        }
    }

    // every edge the lazy brain knows carries the dense weight
    for fiber in brain.fibers() {
        let n_dst = brain.area(fiber.dst).unwrap().params.n as usize;
        let d = dense.fiber(fiber.src, fiber.dst);
        for (i, j, _) in fiber.edges() {
            let lazy = brain.weight(fiber.src, fiber.dst, i, j).unwrap();
            assert_eq!(lazy, d.w[i as usize * n_dst + j as usize]);
        }
        // and no dense edge of a sampled row is missing
        for i in 0..brain.area(fiber.src).unwrap().params.n {
            if let Some(targets) = fiber.targets(i) {
                let dense_count = (0..n_dst).filter(|&j| d.w[i as usize * n_dst + j] > 0.0).count();
                assert_eq!(targets.len(), dense_count);
            }
        }
    }
}
