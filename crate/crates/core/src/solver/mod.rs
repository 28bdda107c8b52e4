//! VM placement: exact branch-and-bound, an exhaustive oracle, and a greedy baseline.
//!
//! All three share the same canonical orders. VMs are considered by descending
//! CPU demand (ties by id); servers cell-major then by index. Among placements
//! with equal objective, the one whose assignment vector (indexed by canonical
//! VM order, valued by canonical server position) is lexicographically
//! smallest wins.

pub mod bnb;
pub mod brute;
pub mod feasibility;
pub mod greedy;
pub mod routing;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{self, DeviceSpecs, PowerReport, Weights};
use crate::topology::{NodeId, Topology};
use crate::workload::Workload;

pub use bnb::solve_bnb;
pub use brute::{solve_bruteforce, DEFAULT_ORACLE_CAP};
pub use feasibility::{check_feasibility, Violation};
pub use greedy::solve_greedy;
pub use routing::{route_flows, FlowAssignment};

/// Borrowed view of one problem instance.
#[derive(Clone, Copy, Debug)]
pub struct Instance<'a> {
    pub topology: &'a Topology,
    pub workload: &'a Workload,
    pub specs: &'a DeviceSpecs,
}

impl<'a> Instance<'a> {
    pub fn new(topology: &'a Topology, workload: &'a Workload, specs: &'a DeviceSpecs) -> Result<Self> {
        specs.validate()?;
        if specs.cells.len() != topology.cells() {
            return Err(Error::InvalidConfig(format!(
                "{} server specs for {} cells",
                specs.cells.len(),
                topology.cells()
            )));
        }
        let n = workload.vms.len();
        for (i, vm) in workload.vms.iter().enumerate() {
            if vm.id != i {
                return Err(Error::InvalidConfig(format!("VM ids must be 0..{n}, found {} at {i}", vm.id)));
            }
            if !topology.contains(&vm.origin) {
                return Err(Error::NodeNotFound(vm.origin));
            }
        }
        for ((from, to), _) in workload.traffic.iter() {
            if from >= n || to >= n || from == to {
                return Err(Error::InvalidConfig(format!("bad traffic entry ({from}, {to})")));
            }
        }
        Ok(Instance { topology, workload, specs })
    }

    /// VM ids by descending CPU demand, ties by id.
    pub fn canonical_vm_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.workload.vms.len()).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (&self.workload.vms[a], &self.workload.vms[b]);
            vb.cpu_ghz.total_cmp(&va.cpu_ghz).then(a.cmp(&b))
        });
        order
    }

    pub fn canonical_servers(&self) -> Vec<NodeId> {
        self.topology.servers().collect()
    }
}

/// Total map from VM id to the server hosting it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub assign: BTreeMap<usize, NodeId>,
}

impl Placement {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from per-canonical-VM server positions.
    pub(crate) fn from_positions(order: &[usize], servers: &[NodeId], positions: &[usize]) -> Self {
        Placement { assign: order.iter().zip(positions).map(|(&vm, &s)| (vm, servers[s])).collect() }
    }

    pub fn server_of(&self, vm: usize) -> Option<NodeId> {
        self.assign.get(&vm).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// Feasible but not proven optimal (heuristic result).
    Feasible,
    Infeasible,
    Aborted,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: Status,
    /// Best placement found; `None` when no feasible placement was seen.
    pub placement: Option<Placement>,
    pub flows: Option<FlowAssignment>,
    pub report: Option<PowerReport>,
    pub nodes_explored: u64,
}

impl Solution {
    pub(crate) fn infeasible(nodes_explored: u64) -> Self {
        Solution { status: Status::Infeasible, placement: None, flows: None, report: None, nodes_explored }
    }

    pub fn objective(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.objective)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub time_budget: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { time_budget: Duration::from_secs(60) }
    }
}

/// Ranking key: `(objective, 0)` for weighted runs, `(N_PC, P_PC)` for lexicographic ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Key(pub f64, pub f64);

impl Key {
    pub fn of(report: &PowerReport, weights: &Weights) -> Self {
        if weights.lexicographic {
            Key(report.n_pc_w, report.p_pc_w)
        } else {
            Key(report.objective, 0.0)
        }
    }

    pub fn cmp(&self, other: &Key) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.total_cmp(&other.1))
    }
}

/// A complete candidate that survived every constraint.
#[derive(Clone, Debug)]
pub(crate) struct Candidate {
    pub key: Key,
    pub positions: Vec<usize>,
    pub placement: Placement,
    pub flows: FlowAssignment,
    pub report: PowerReport,
}

impl Candidate {
    /// Strictly better: smaller key, or equal key with a lexicographically smaller assignment.
    pub fn beats(&self, other: &Candidate) -> bool {
        match self.key.cmp(&other.key) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.positions < other.positions,
        }
    }
}

/// Route and evaluate a complete assignment. `None` when any constraint fails.
pub(crate) fn score(
    inst: &Instance<'_>,
    order: &[usize],
    servers: &[NodeId],
    positions: &[usize],
    weights: &Weights,
) -> Result<Option<Candidate>> {
    let placement = Placement::from_positions(order, servers, positions);
    if !feasibility::assignment_violations(inst, &placement).is_empty() {
        return Ok(None);
    }
    let flows = route_flows(inst, &placement)?;
    if !feasibility::network_violations(inst, &flows).is_empty() {
        return Ok(None);
    }
    let report = power::evaluate(inst, &placement, &flows, weights)?;
    Ok(Some(Candidate { key: Key::of(&report, weights), positions: positions.to_vec(), placement, flows, report }))
}

pub(crate) fn finish(status: Status, best: Option<Candidate>, nodes_explored: u64) -> Solution {
    match best {
        Some(c) => Solution {
            status,
            placement: Some(c.placement),
            flows: Some(c.flows),
            report: Some(c.report),
            nodes_explored,
        },
        None if status == Status::Aborted => Solution { status, ..Solution::infeasible(nodes_explored) },
        None => Solution::infeasible(nodes_explored),
    }
}
