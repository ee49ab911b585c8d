//! Approximate neighbourhood functions for graphs and device networks.
//!
//! The building blocks, bottom to top:
//!
//! * [`hll`]: HyperLogLog sketches with deterministic seeded hashing and
//!   register-wise lattice union, plus an exact-set counter behind the same
//!   interface for debugging and oracle checks.
//! * [`graph`]: graph model, edge-list text format, seeded generators, and
//!   the exact BFS oracles everything else is validated against.
//! * [`anf`]: synchronous HyperANF, iterating the counter-union recurrence
//!   over the whole graph to estimate `N(v, h, C)` for every vertex.
//! * [`runtime`]: a deterministic simulator for a network of devices firing
//!   in asynchronous rounds against their neighbours' latest exports, with
//!   scripted topology and sensor churn.
//! * [`programs`]: the device programs that run on the simulator,
//!   distributed HyperANF, harmonic centrality, and centrality-weighted
//!   leader election.
//!
//! The crate is `no_std` (with `alloc`); all I/O, file formats and the CLI
//! live in the companion `anfield-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod anf;
pub mod graph;
pub mod hll;
pub mod programs;
pub mod runtime;

pub use anf::{fixpoint_radius, hyperanf_seq, EstimateTable};
pub use graph::{Graph, SourceSet};
pub use hll::{Counter, CounterKind, ExactCounter, HllSketch};
pub use programs::{
    harmonic_centrality, AnfOutput, ElectionOutput, HyperAnfProgram, LeaderClaim,
    LeaderElectionProgram,
};
pub use runtime::{
    ChurnScript, DeviceId, FieldProgram, NetworkState, Scheduler, SchedulerPolicy, Trace,
};
