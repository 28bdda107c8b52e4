//! Energy-minimizing VM placement for heterogeneous fog cells joined by a
//! WDM passive optical network.
//!
//! The crate builds the fog graph ([`topology`]), draws reproducible VM
//! workloads ([`workload`]), prices device power ([`power`]), solves the
//! placement exactly ([`solver`]), exports the full mixed-integer model in LP
//! format ([`lp`]) and runs weighting scenarios end to end ([`scenario`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lp;
pub mod power;
pub mod scenario;
pub mod solver;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
pub use power::{DeviceSpecs, PowerReport, ServerSpec, Weights};
pub use solver::{Instance, Placement, Solution, SolveOptions, Status};
pub use topology::{NodeId, Topology, TopologyConfig};
pub use workload::{Workload, WorkloadConfig};
