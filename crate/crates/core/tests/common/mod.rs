//! Test-side oracles shared by the integration suites.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fogplace::solver::routing::{Commodity, FlowAssignment};
use fogplace::solver::Violation;
use fogplace::topology::NodeKind;
use fogplace::{DeviceSpecs, Instance, NodeId, Placement, Topology, Workload};
use rand::seq::SliceRandom;
use rand::Rng;

/// Hop sequence on the star-of-stars topology, worked out from its shape
/// rather than by search: climb to the local hub, cross the mesh if the
/// cells differ, descend.
pub fn route(s: NodeId, d: NodeId) -> Vec<NodeId> {
    if s == d {
        return Vec::new();
    }
    let up = |n: NodeId| if n.kind == NodeKind::AwgrHub { vec![n] } else { vec![n, NodeId::hub(n.cell.unwrap())] };
    let mut path = up(s);
    let mut down = up(d);
    down.reverse();
    if path.last() == down.first() {
        path.pop();
    }
    path.extend(down);
    path
}

pub fn endpoints(w: &Workload, p: &Placement, c: Commodity) -> (NodeId, NodeId) {
    match c {
        Commodity::Pair { from, to } => (p.server_of(from).unwrap(), p.server_of(to).unwrap()),
        Commodity::Ingress { vm } => (w.vms[vm].origin, p.server_of(vm).unwrap()),
    }
}

/// Every commodity with its demand, independently enumerated.
pub fn demands(w: &Workload) -> Vec<(Commodity, f64)> {
    let mut out: Vec<(Commodity, f64)> =
        w.traffic.iter().filter(|(_, g)| *g > 0.0).map(|((from, to), g)| (Commodity::Pair { from, to }, g)).collect();
    out.extend(
        w.vms.iter().filter(|v| v.ingress_gbps > 0.0).map(|v| (Commodity::Ingress { vm: v.id }, v.ingress_gbps)),
    );
    out
}

/// Undirected link load keyed by sorted endpoints.
pub fn link_loads(w: &Workload, p: &Placement) -> BTreeMap<(NodeId, NodeId), f64> {
    let mut load = BTreeMap::new();
    for (c, g) in demands(w) {
        let (s, d) = endpoints(w, p, c);
        for hop in route(s, d).windows(2) {
            let key = if hop[0] < hop[1] { (hop[0], hop[1]) } else { (hop[1], hop[0]) };
            *load.entry(key).or_insert(0.0) += g;
        }
    }
    load
}

/// Outflow minus inflow for every node on every flow must equal the signed
/// demand: `+d` at the source, `-d` at the target, zero elsewhere.
pub fn conservation_errors(t: &Topology, w: &Workload, p: &Placement, f: &FlowAssignment) -> Vec<String> {
    let mut errors = Vec::new();
    let expected = demands(w);
    if expected.len() != f.flows.len() {
        errors.push(format!("{} flows for {} commodities", f.flows.len(), expected.len()));
        return errors;
    }
    for (flow, (c, d)) in f.flows.iter().zip(expected) {
        if flow.commodity != c || flow.demand_gbps != d {
            errors.push(format!("flow {:?} does not match commodity {:?}", flow.commodity, c));
            continue;
        }
        let (src, dst) = endpoints(w, p, c);
        let mut net: BTreeMap<NodeId, f64> = t.nodes().iter().map(|n| (*n, 0.0)).collect();
        for (i, hop) in flow.nodes.windows(2).enumerate() {
            let link = &t.links()[flow.links[i]];
            if !((link.a == hop[0] && link.b == hop[1]) || (link.a == hop[1] && link.b == hop[0])) {
                errors.push(format!("{:?}: link {} does not join {} and {}", c, link, hop[0], hop[1]));
            }
            *net.get_mut(&hop[0]).unwrap() += d;
            *net.get_mut(&hop[1]).unwrap() -= d;
        }
        for (node, value) in net {
            let want = if src == dst {
                0.0
            } else if node == src {
                d
            } else if node == dst {
                -d
            } else {
                0.0
            };
            if value != want {
                errors.push(format!("{c:?} at {node}: net outflow {value}, expected {want}"));
            }
        }
    }
    errors
}

/// Shuffled first-fit: a random placement respecting CPU and RAM. `None` when
/// first-fit fails or the ingress at some access ONU exceeds its line rate,
/// which no placement can fix.
pub fn random_feasible<R: Rng>(rng: &mut R, t: &Topology, w: &Workload, specs: &DeviceSpecs) -> Option<Placement> {
    let mut at_onu: BTreeMap<NodeId, f64> = BTreeMap::new();
    for v in &w.vms {
        *at_onu.entry(v.origin).or_default() += v.ingress_gbps;
    }
    if at_onu.values().any(|g| *g > specs.access_onu.rate_gbps) {
        return None;
    }
    let mut servers: Vec<NodeId> = t.servers().collect();
    let mut cpu: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut ram: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut p = Placement::new();
    for vm in &w.vms {
        servers.shuffle(rng);
        let s = *servers.iter().find(|s| {
            let spec = specs.server(s).unwrap();
            cpu.get(*s).unwrap_or(&0.0) + vm.cpu_ghz <= spec.cpu_ghz
                && ram.get(*s).unwrap_or(&0.0) + vm.ram_mb <= spec.ram_mb()
        })?;
        *cpu.entry(s).or_default() += vm.cpu_ghz;
        *ram.entry(s).or_default() += vm.ram_mb;
        p.assign.insert(vm.id, s);
    }
    Some(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    DropVm,
    NonServer,
    Cpu,
    Ram,
    LinkCapacity,
}

pub const MUTATIONS: [Mutation; 5] =
    [Mutation::DropVm, Mutation::NonServer, Mutation::Cpu, Mutation::Ram, Mutation::LinkCapacity];

/// A mutated copy of a feasible instance and the violation that must be reported.
pub struct Mutated {
    pub topology: Topology,
    pub workload: Workload,
    pub placement: Placement,
    pub expect: Box<dyn Fn(&Violation) -> bool>,
    pub what: String,
}

pub fn mutate<R: Rng>(
    rng: &mut R,
    m: Mutation,
    t: &Topology,
    w: &Workload,
    specs: &DeviceSpecs,
    p: &Placement,
) -> Mutated {
    let mut topology = t.clone();
    let mut workload = w.clone();
    let mut placement = p.clone();
    let vm = rng.gen_range(0..w.vms.len());
    let host = p.server_of(vm).unwrap();
    let spec = specs.server(&host).unwrap();
    let sum = |f: fn(&fogplace::workload::VmRequest) -> f64| -> f64 {
        w.vms.iter().filter(|v| p.server_of(v.id) == Some(host)).map(f).sum()
    };
    let expect: Box<dyn Fn(&Violation) -> bool>;
    let what;
    match m {
        Mutation::DropVm => {
            placement.assign.remove(&vm);
            expect = Box::new(move |v| *v == Violation::Unassigned { vm });
            what = format!("drop VM {vm}");
        }
        Mutation::NonServer => {
            let hub = NodeId::hub(rng.gen_range(0..t.cells()));
            placement.assign.insert(vm, hub);
            expect = Box::new(move |v| *v == Violation::NotAServer { vm, node: hub });
            what = format!("VM {vm} onto {hub}");
        }
        Mutation::Cpu => {
            let room = spec.cpu_ghz - sum(|v| v.cpu_ghz);
            workload.vms[vm].cpu_ghz += room + rng.gen_range(0.01..1.0);
            expect = Box::new(move |v| matches!(v, Violation::Cpu { server, .. } if *server == host));
            what = format!("inflate CPU of VM {vm} on {host}");
        }
        Mutation::Ram => {
            let room = spec.ram_mb() - sum(|v| v.ram_mb);
            workload.vms[vm].ram_mb += room + rng.gen_range(1.0..500.0);
            expect = Box::new(move |v| matches!(v, Violation::Ram { server, .. } if *server == host));
            what = format!("inflate RAM of VM {vm} on {host}");
        }
        Mutation::LinkCapacity => {
            // make sure some traffic crosses a link
            if link_loads(&workload, &placement).is_empty() {
                let other = (vm + 1) % w.vms.len();
                if placement.server_of(vm) != placement.server_of(other) {
                    workload.traffic.insert(vm, other, 1.0);
                } else {
                    workload.vms[vm].ingress_gbps = 1.0;
                }
            }
            let loads = link_loads(&workload, &placement);
            let peak = loads.values().cloned().fold(0.0, f64::max);
            let cap = peak * rng.gen_range(0.1..0.99);
            let mut cfg = t.config().clone();
            cfg.link_capacity_gbps = cap;
            topology = Topology::build(&cfg).unwrap();
            let over: Vec<String> =
                loads.iter().filter(|(_, l)| **l > cap).map(|((a, b), _)| format!("{a}--{b}")).collect();
            what = format!("shrink links to {cap} Gbps, overloading {over:?}");
            expect = Box::new(move |v| matches!(v, Violation::LinkCapacity { link, .. } if over.contains(link)));
        }
    }
    Mutated { topology, workload, placement, expect, what }
}

/// Run one feasibility round: the clean placement must pass, the mutated one
/// must report the injected violation. Returns a description of any failure.
pub fn feasibility_round<R: Rng>(rng: &mut R, t: &Topology, specs: &DeviceSpecs, w: &Workload) -> Result<(), String> {
    let Some(p) = random_feasible(rng, t, w, specs) else { return Ok(()) };
    let inst = Instance::new(t, w, specs).map_err(|e| e.to_string())?;
    let clean = fogplace::solver::check_feasibility(&inst, &p);
    if !clean.is_empty() {
        return Err(format!("clean placement flagged: {clean:?}"));
    }
    let flows = fogplace::solver::route_flows(&inst, &p).map_err(|e| e.to_string())?;
    let errs = conservation_errors(t, w, &p, &flows);
    if !errs.is_empty() {
        return Err(errs.join("; "));
    }
    let m = *MUTATIONS.choose(rng).unwrap();
    let mutated = mutate(rng, m, t, w, specs, &p);
    let inst = Instance::new(&mutated.topology, &mutated.workload, specs).map_err(|e| e.to_string())?;
    let found = fogplace::solver::check_feasibility(&inst, &mutated.placement);
    if !found.iter().any(|v| (mutated.expect)(v)) {
        return Err(format!("{}: not flagged, got {found:?}", mutated.what));
    }
    Ok(())
}

/// Optimum of an LP-format model according to HiGHS, or `None` if it reports
/// anything but optimal.
pub fn highs_optimum(lp_text: &str) -> Option<f64> {
    use std::ffi::CString;
    let file = tempfile::Builder::new().suffix(".lp").tempfile().unwrap();
    std::fs::write(file.path(), lp_text).unwrap();
    let path = CString::new(file.path().to_str().unwrap()).unwrap();
    let opt = |s: &str| CString::new(s).unwrap();
    // SAFETY: the handle is created, used and destroyed on this thread only,
    // and every string outlives the call it is passed to.
    unsafe {
        let h = highs_sys::Highs_create();
        highs_sys::Highs_setBoolOptionValue(h, opt("output_flag").as_ptr(), 0);
        highs_sys::Highs_setDoubleOptionValue(h, opt("mip_rel_gap").as_ptr(), 1e-10);
        highs_sys::Highs_setDoubleOptionValue(h, opt("mip_abs_gap").as_ptr(), 1e-9);
        highs_sys::Highs_setDoubleOptionValue(h, opt("mip_feasibility_tolerance").as_ptr(), 1e-9);
        highs_sys::Highs_setDoubleOptionValue(h, opt("primal_feasibility_tolerance").as_ptr(), 1e-9);
        let read = highs_sys::Highs_readModel(h, path.as_ptr());
        let result = if read == highs_sys::STATUS_ERROR {
            None
        } else {
            highs_sys::Highs_run(h);
            match highs_sys::Highs_getModelStatus(h) {
                highs_sys::MODEL_STATUS_OPTIMAL => Some(highs_sys::Highs_getObjectiveValue(h)),
                _ => None,
            }
        };
        highs_sys::Highs_destroy(h);
        result
    }
}
