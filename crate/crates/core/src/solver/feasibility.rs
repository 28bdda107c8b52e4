use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::solver::routing::{route_flows, FlowAssignment};
use crate::solver::{Instance, Placement};
use crate::topology::NodeId;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Unassigned { vm: usize },
    UnknownVm { vm: usize },
    NotAServer { vm: usize, node: NodeId },
    Cpu { server: NodeId, load_ghz: f64, capacity_ghz: f64, excess_ghz: f64 },
    Ram { server: NodeId, load_mb: f64, capacity_mb: f64, excess_mb: f64 },
    LinkCapacity { link: String, load_gbps: f64, capacity_gbps: f64, excess_gbps: f64 },
    AccessOnuRate { onu: NodeId, load_gbps: f64, rate_gbps: f64, excess_gbps: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            Unassigned { vm } => write!(f, "VM {vm} is not assigned"),
            UnknownVm { vm } => write!(f, "assignment names unknown VM {vm}"),
            NotAServer { vm, node } => write!(f, "VM {vm} assigned to {node}, which is not a server"),
            Cpu { server, excess_ghz, .. } => write!(f, "{server}: CPU over capacity by {excess_ghz:.6} GHz"),
            Ram { server, excess_mb, .. } => write!(f, "{server}: RAM over capacity by {excess_mb:.3} MB"),
            LinkCapacity { link, excess_gbps, .. } => write!(f, "{link}: over capacity by {excess_gbps:.6} Gbps"),
            AccessOnuRate { onu, excess_gbps, .. } => write!(f, "{onu}: over line rate by {excess_gbps:.6} Gbps"),
        }
    }
}

/// Totality, server identity, CPU and RAM. Loads are summed in VM id order.
pub fn assignment_violations(inst: &Instance<'_>, p: &Placement) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.workload.vms.len();
    out.extend(p.assign.keys().filter(|&&vm| vm >= n).map(|&vm| Violation::UnknownVm { vm }));

    let mut cpu: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut ram: BTreeMap<NodeId, f64> = BTreeMap::new();
    for vm in &inst.workload.vms {
        match p.assign.get(&vm.id) {
            None => out.push(Violation::Unassigned { vm: vm.id }),
            Some(node) if !node.is_server() || !inst.topology.contains(node) => {
                out.push(Violation::NotAServer { vm: vm.id, node: *node })
            }
            Some(node) => {
                *cpu.entry(*node).or_default() += vm.cpu_ghz;
                *ram.entry(*node).or_default() += vm.ram_mb;
            }
        }
    }
    for (server, load) in cpu {
        let Some(spec) = inst.specs.server(&server) else { continue };
        if load > spec.cpu_ghz {
            out.push(Violation::Cpu {
                server,
                load_ghz: load,
                capacity_ghz: spec.cpu_ghz,
                excess_ghz: load - spec.cpu_ghz,
            });
        }
        let load_mb = ram[&server];
        if load_mb > spec.ram_mb() {
            out.push(Violation::Ram {
                server,
                load_mb,
                capacity_mb: spec.ram_mb(),
                excess_mb: load_mb - spec.ram_mb(),
            });
        }
    }
    out
}

/// Link capacity and access-ONU line rate for already routed flows.
pub fn network_violations(inst: &Instance<'_>, flows: &FlowAssignment) -> Vec<Violation> {
    let links = inst.topology.links();
    let mut out: Vec<Violation> = flows
        .overloads
        .iter()
        .map(|o| Violation::LinkCapacity {
            link: links[o.link].to_string(),
            load_gbps: o.load_gbps,
            capacity_gbps: o.capacity_gbps,
            excess_gbps: o.load_gbps - o.capacity_gbps,
        })
        .collect();
    let rate = inst.specs.access_onu.rate_gbps;
    for onu in inst.topology.access_onus() {
        let load = flows.throughput(&onu);
        if load > rate {
            out.push(Violation::AccessOnuRate { onu, load_gbps: load, rate_gbps: rate, excess_gbps: load - rate });
        }
    }
    out
}

/// Every constraint violated by `p`; empty iff the placement is feasible.
pub fn check_feasibility(inst: &Instance<'_>, p: &Placement) -> Vec<Violation> {
    let mut out = assignment_violations(inst, p);
    let routable = !out.iter().any(|v| matches!(v, Violation::Unassigned { .. } | Violation::NotAServer { .. }));
    if routable {
        if let Ok(flows) = route_flows(inst, p) {
            out.extend(network_violations(inst, &flows));
        }
    }
    out
}
