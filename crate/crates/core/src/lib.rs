//! Assembly Calculus simulator and the blocks-world programs that run on it.
//!
//! * [`substrate`]: areas, fibers, lazily sampled synapses, cap-k rounds.
//! * [`ac_ops`]: activate, project, strong projection, assembly probe.
//! * [`bw_repr`]: stacks stored as chains of assemblies (parse, readout,
//!   pop, put, intersect).
//! * [`planner`]: symbolic blocks world, naive and 2-approximation planners,
//!   neural execution, BFS oracle.
//! * [`instances`]: task file format and random task generation.
//! * [`harness`]: seeded chaining experiments and CSV output.

pub mod ac_ops;
pub mod bw_repr;
pub mod harness;
pub mod instances;
pub mod planner;
pub mod substrate;

pub use ac_ops::{OpError, ProjectOptions, ProjectionResult, StrongProjectOptions, StrongProjection};
pub use substrate::{overlap, AreaId, AreaParams, Assembly, Brain, FiberDirection, SubstrateError};
