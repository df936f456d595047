//! Assembly Calculus operations built on substrate rounds: block activation,
//! projection, strong projection and the assembly probe.

use thiserror::Error;

use crate::substrate::{overlap, AreaId, Assembly, Brain, RoundConfig, RoundResult, SubstrateError, Target};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error("area {0} is not an explicit area")]
    NotExplicit(AreaId),
    #[error("block {block} outside 1..={count}")]
    BlockOutOfRange { block: u32, count: u32 },
    #[error("source area {0} has no active assembly")]
    QuiescentSource(AreaId),
    #[error("area {0} is inhibited")]
    InhibitedArea(AreaId),
    #[error("fiber {0} -> {1} is inhibited")]
    InhibitedFiber(AreaId, AreaId),
    #[error("no disinhibited area has winners")]
    NothingActive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectOptions {
    pub max_rounds: usize,
    /// Consecutive-round overlap needed to call the destination converged.
    pub tol: f64,
    pub plasticity: bool,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            max_rounds: 50,
            tol: 1.0,
            plasticity: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongProjectOptions {
    /// Rounds always run before convergence is checked.
    pub min_rounds: usize,
    pub max_rounds: usize,
    pub tol: f64,
    pub plasticity: bool,
}

impl Default for StrongProjectOptions {
    fn default() -> Self {
        Self {
            min_rounds: 1,
            max_rounds: 30,
            tol: 1.0,
            plasticity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub assembly: Assembly,
    pub rounds: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrongProjection {
    pub rounds: usize,
    pub converged: bool,
}

/// Presence threshold used inside programs.
pub const PRESENCE_THRESHOLD: f64 = 0.75;
/// Threshold for counting an assembly as "strong".
pub const STRONG_THRESHOLD: f64 = 0.95;

fn settled(r: &RoundResult, tol: f64) -> bool {
    r.clamped || (!r.previous.is_empty() && !r.current.is_empty() && overlap(&r.current, &r.previous) >= tol)
}

impl Brain {
    /// Clamps the explicit area's winners to the assembly of block `b` (1-based).
    pub fn activate_block(&mut self, blocks: AreaId, b: u32) -> Result<(), OpError> {
        let area = self.area(blocks)?;
        let count = area.explicit_count().ok_or(OpError::NotExplicit(blocks))?;
        let range = b
            .checked_sub(1)
            .and_then(|i| area.explicit_assembly(i))
            .ok_or(OpError::BlockOutOfRange { block: b, count })?;
        let neurons: Vec<u32> = range.collect();
        self.set_winners(blocks, &neurons)?;
        Ok(())
    }

    /// Projects the active assembly of `src` into `dst`.
    ///
    /// `src` is held fixed; `dst` is recomputed from `src` plus its own
    /// recurrence until two consecutive winner sets overlap by at least `tol`
    /// or `max_rounds` is reached. Other areas are untouched.
    pub fn project(&mut self, src: AreaId, dst: AreaId, opts: ProjectOptions) -> Result<ProjectionResult, OpError> {
        let fiber = self.fiber(src, dst).ok_or(SubstrateError::UnknownFiber(src, dst))?;
        if fiber.is_inhibited() {
            return Err(OpError::InhibitedFiber(src, dst));
        }
        if self.area(dst)?.is_inhibited() {
            return Err(OpError::InhibitedArea(dst));
        }
        if self.winners(src).is_empty() {
            return Err(OpError::QuiescentSource(src));
        }
        Ok(self.drive(src, dst, opts))
    }

    /// Projection that ignores inhibition flags. Used by probes and programs
    /// that retrieve stored structure.
    pub fn drive(&mut self, src: AreaId, dst: AreaId, opts: ProjectOptions) -> ProjectionResult {
        let recurrent = self.fiber(dst, dst).is_some();
        let cfg = RoundConfig {
            plasticity: opts.plasticity,
            keep_silent: true,
        };
        let mut rounds = 0;
        let mut converged = false;
        while rounds < opts.max_rounds {
            let mut sources = vec![src];
            if recurrent && !self.winners(dst).is_empty() {
                sources.push(dst);
                sources.sort_unstable();
            }
            let target = Target {
                area: dst,
                sources,
                clamped: false,
            };
            let results = self.run_round(std::slice::from_ref(&target), cfg, true);
            rounds += 1;
            if settled(&results[0], opts.tol) {
                converged = true;
                break;
            }
        }
        ProjectionResult {
            assembly: Assembly {
                area: dst,
                neurons: self.winners(dst).to_vec(),
            },
            rounds,
            converged,
        }
    }

    /// Synchronous rounds over every disinhibited area and fiber until each
    /// recomputed area repeats its winners (overlap >= `tol`).
    ///
    /// Areas with no input stay quiescent rather than firing an arbitrary set.
    pub fn strong_project(&mut self, opts: StrongProjectOptions) -> Result<StrongProjection, OpError> {
        let any_active = self
            .areas()
            .iter()
            .any(|a| !a.is_inhibited() && !a.winners().is_empty());
        if !any_active {
            return Err(OpError::NothingActive);
        }
        let cfg = RoundConfig {
            plasticity: opts.plasticity,
            keep_silent: true,
        };
        let mut rounds = 0;
        while rounds < opts.max_rounds {
            let targets = self.flag_targets();
            let results = self.run_round(&targets, cfg, true);
            rounds += 1;
            if rounds >= opts.min_rounds && results.iter().all(|r| settled(r, opts.tol)) {
                return Ok(StrongProjection { rounds, converged: true });
            }
        }
        Ok(StrongProjection {
            rounds,
            converged: false,
        })
    }

    /// Fires the current winners of `area` through its recurrent edges once,
    /// without plasticity, and reports whether they reproduce themselves with
    /// overlap at least `threshold`. The brain is left unchanged.
    pub fn is_assembly(&mut self, area: AreaId, threshold: f64) -> Result<bool, OpError> {
        let a = self.area(area)?;
        if a.winners().is_empty() || a.is_explicit() {
            return Ok(false);
        }
        let target = Target {
            area,
            sources: vec![area],
            clamped: false,
        };
        let cfg = RoundConfig {
            plasticity: false,
            keep_silent: true,
        };
        let r = self.run_round(&[target], cfg, false);
        Ok(overlap(&r[0].current, &r[0].previous) >= threshold)
    }

    /// Winners `dst` would pick from the current winners of `src` alone, in
    /// one round, without plasticity. Nothing is modified.
    pub fn response(&mut self, src: AreaId, dst: AreaId) -> Result<Vec<u32>, OpError> {
        self.fiber(src, dst).ok_or(SubstrateError::UnknownFiber(src, dst))?;
        if self.winners(src).is_empty() {
            return Err(OpError::QuiescentSource(src));
        }
        let target = Target {
            area: dst,
            sources: vec![src],
            clamped: false,
        };
        let cfg = RoundConfig {
            plasticity: false,
            keep_silent: true,
        };
        let mut r = self.run_round(&[target], cfg, false);
        Ok(std::mem::take(&mut r[0].current))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::FiberDirection;

    fn stimulus_brain(seed: u64) -> (Brain, AreaId, AreaId) {
        let mut b = Brain::new(0.1, seed, 0.1).unwrap();
        let s = b.add_explicit_area("stim", 4, 30).unwrap();
        let x = b.add_area("x", 2000, 30, 0.1).unwrap();
        b.connect(s, x).unwrap();
        (b, s, x)
    }

    #[test]
    fn activate_block_ranges() {
        let (mut b, s, x) = stimulus_brain(1);
        b.activate_block(s, 4).unwrap();
        assert_eq!(b.winners(s), (90..120).collect::<Vec<_>>().as_slice());
        assert_eq!(b.activate_block(s, 0), Err(OpError::BlockOutOfRange { block: 0, count: 4 }));
        assert_eq!(b.activate_block(s, 5), Err(OpError::BlockOutOfRange { block: 5, count: 4 }));
        assert_eq!(b.activate_block(x, 1), Err(OpError::NotExplicit(x)));
    }

    #[test]
    fn project_preconditions() {
        let (mut b, s, x) = stimulus_brain(1);
        assert_eq!(b.project(s, x, ProjectOptions::default()), Err(OpError::InhibitedFiber(s, x)));
        b.set_fiber_inhibition(s, x, false, FiberDirection::Both).unwrap();
        assert_eq!(b.project(s, x, ProjectOptions::default()), Err(OpError::InhibitedArea(x)));
        b.set_area_inhibition(x, false).unwrap();
        assert_eq!(b.project(s, x, ProjectOptions::default()), Err(OpError::QuiescentSource(s)));
        b.activate_block(s, 1).unwrap();
        let r = b.project(s, x, ProjectOptions::default()).unwrap();
        assert_eq!(r.assembly.neurons.len(), 30);
        assert!(r.rounds <= 50);
    }

    #[test]
    fn projected_assembly_passes_probe_and_probe_is_pure() {
        let (mut b, s, x) = stimulus_brain(7);
        b.set_fiber_inhibition(s, x, false, FiberDirection::Both).unwrap();
        b.set_area_inhibition(x, false).unwrap();
        b.activate_block(s, 2).unwrap();
        let r = b.project(s, x, ProjectOptions::default()).unwrap();
        assert!(r.converged);
        // keep firing the converged pair so the recurrent weights catch up
        b.set_area_inhibition(s, false).unwrap();
        let held = b
            .strong_project(StrongProjectOptions {
                min_rounds: 25,
                ..Default::default()
            })
            .unwrap();
        assert!(held.converged);
        let assembly = b.winners(x).to_vec();
        let before: Vec<(u32, u32, u16)> = {
            let mut e: Vec<_> = b.fiber(x, x).unwrap().edges().collect();
            e.sort_unstable();
            e
        };
        assert!(b.is_assembly(x, PRESENCE_THRESHOLD).unwrap());
        let after: Vec<(u32, u32, u16)> = {
            let mut e: Vec<_> = b.fiber(x, x).unwrap().edges().collect();
            e.sort_unstable();
            e
        };
        assert_eq!(before, after);
        assert_eq!(b.winners(x), assembly.as_slice());
    }

    #[test]
    fn untrained_and_empty_areas_fail_probe() {
        let (mut b, _, x) = stimulus_brain(3);
        assert!(!b.is_assembly(x, PRESENCE_THRESHOLD).unwrap());
        // arbitrary winner set with untouched recurrent weights
        let random: Vec<u32> = (0..30).map(|i| i * 61 + 5).collect();
        b.set_winners(x, &random).unwrap();
        assert!(!b.is_assembly(x, PRESENCE_THRESHOLD).unwrap());
    }

    #[test]
    fn strong_project_requires_activity_and_stops_at_fixed_point() {
        let (mut b, s, x) = stimulus_brain(5);
        assert_eq!(b.strong_project(StrongProjectOptions::default()), Err(OpError::NothingActive));
        b.set_area_inhibition(s, false).unwrap();
        b.set_area_inhibition(x, false).unwrap();
        b.set_fiber_inhibition(s, x, false, FiberDirection::Forward).unwrap();
        b.activate_block(s, 3).unwrap();
        let first = b.strong_project(StrongProjectOptions::default()).unwrap();
        assert!(first.converged);
        let again = b.strong_project(StrongProjectOptions::default()).unwrap();
        assert_eq!(again, StrongProjection { rounds: 1, converged: true });
    }

    #[test]
    fn response_is_pure() {
        let (mut b, s, x) = stimulus_brain(5);
        b.activate_block(s, 1).unwrap();
        let r1 = b.response(s, x).unwrap();
        let r2 = b.response(s, x).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.len(), 30);
        assert!(b.winners(x).is_empty());
        assert_eq!(b.step_counter(), 0);
    }
}
