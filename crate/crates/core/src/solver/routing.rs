//! Commodity routing over the fixed shortest-path table.
//!
//! A commodity is either a directed inter-VM demand or a VM's end-user ingress
//! (origin access ONU towards the hosting server). Each is carried whole on
//! the path between its endpoint nodes; co-located pairs load nothing.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{Instance, Placement};
use crate::topology::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Commodity {
    Pair { from: usize, to: usize },
    Ingress { vm: usize },
}

impl Commodity {
    /// Stable identifier, safe for LP variable names.
    pub fn tag(&self) -> String {
        match self {
            Commodity::Pair { from, to } => format!("p{from}_{to}"),
            Commodity::Ingress { vm } => format!("in{vm}"),
        }
    }
}

/// Every commodity with positive demand, pairs first (row-major) then ingress by VM id.
pub fn commodities(inst: &Instance<'_>) -> Vec<(Commodity, f64)> {
    let pairs =
        inst.workload.traffic.iter().filter(|(_, g)| *g > 0.0).map(|((from, to), g)| (Commodity::Pair { from, to }, g));
    let ingress = inst
        .workload
        .vms
        .iter()
        .filter(|v| v.ingress_gbps > 0.0)
        .map(|v| (Commodity::Ingress { vm: v.id }, v.ingress_gbps));
    pairs.chain(ingress).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flow {
    pub commodity: Commodity,
    pub source: NodeId,
    pub target: NodeId,
    pub demand_gbps: f64,
    /// Nodes visited, source first; empty when both ends share a server.
    pub nodes: Vec<NodeId>,
    /// Link indices in travel order.
    pub links: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkOverload {
    pub link: usize,
    pub load_gbps: f64,
    pub capacity_gbps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowAssignment {
    pub flows: Vec<Flow>,
    /// Aggregate load per link (both directions), indexed like `Topology::links`.
    pub link_load: Vec<f64>,
    /// Traffic entering, leaving or crossing each node.
    pub node_throughput: BTreeMap<NodeId, f64>,
    pub overloads: Vec<LinkOverload>,
}

impl FlowAssignment {
    pub fn throughput(&self, n: &NodeId) -> f64 {
        self.node_throughput.get(n).copied().unwrap_or(0.0)
    }

    pub fn within_capacity(&self) -> bool {
        self.overloads.is_empty()
    }
}

fn endpoints(inst: &Instance<'_>, p: &Placement, c: Commodity) -> Result<(NodeId, NodeId)> {
    let host = |vm: usize| p.server_of(vm).ok_or_else(|| Error::Contract(format!("VM {vm} is not placed")));
    Ok(match c {
        Commodity::Pair { from, to } => (host(from)?, host(to)?),
        Commodity::Ingress { vm } => (inst.workload.vms[vm].origin, host(vm)?),
    })
}

pub fn route_flows(inst: &Instance<'_>, placement: &Placement) -> Result<FlowAssignment> {
    let topo = inst.topology;
    let mut link_load = vec![0.0; topo.links().len()];
    let mut node_throughput = BTreeMap::new();
    let mut flows = Vec::new();
    for (commodity, demand) in commodities(inst) {
        let (source, target) = endpoints(inst, placement, commodity)?;
        let (nodes, links) = if source == target {
            (Vec::new(), Vec::new())
        } else {
            let path = topo.shortest_path(&source, &target)?;
            (path.nodes.clone(), path.links.clone())
        };
        for &l in &links {
            link_load[l] += demand;
        }
        for n in &nodes {
            *node_throughput.entry(*n).or_insert(0.0) += demand;
        }
        flows.push(Flow { commodity, source, target, demand_gbps: demand, nodes, links });
    }
    let overloads = link_load
        .iter()
        .enumerate()
        .filter(|(i, load)| **load > topo.links()[*i].capacity_gbps)
        .map(|(link, &load_gbps)| LinkOverload { link, load_gbps, capacity_gbps: topo.links()[link].capacity_gbps })
        .collect();
    Ok(FlowAssignment { flows, link_load, node_throughput, overloads })
}
