//! Greedy baseline: canonical VM order, each VM on the feasible server that
//! raises the objective least.

use crate::error::Result;
use crate::power::{self, Weights};
use crate::solver::feasibility::{assignment_violations, network_violations};
use crate::solver::{finish, route_flows, score, Instance, Key, Placement, Solution, Status};
use crate::topology::NodeId;
use crate::workload::{TrafficMatrix, Workload};

/// Objective of the sub-instance made of the VMs placed so far, or `None`
/// if that partial placement already violates a constraint.
fn partial_key(
    inst: &Instance<'_>,
    order: &[usize],
    servers: &[NodeId],
    positions: &[usize],
    weights: &Weights,
) -> Result<Option<Key>> {
    let placed = &order[..positions.len()];
    let mut ids: Vec<usize> = placed.to_vec();
    ids.sort_unstable();
    let new_id = |old: usize| ids.binary_search(&old).ok();

    let mut traffic = TrafficMatrix::new();
    for ((from, to), g) in inst.workload.traffic.iter() {
        if let (Some(a), Some(b)) = (new_id(from), new_id(to)) {
            traffic.insert(a, b, g);
        }
    }
    let sub = Workload {
        seed: inst.workload.seed,
        vms: ids
            .iter()
            .enumerate()
            .map(|(i, &old)| {
                let mut vm = inst.workload.vms[old].clone();
                vm.id = i;
                vm
            })
            .collect(),
        traffic,
    };
    let sub_inst = Instance { workload: &sub, ..*inst };
    let placement = Placement {
        assign: placed.iter().zip(positions).map(|(&vm, &s)| (new_id(vm).expect("placed VM"), servers[s])).collect(),
    };
    if !assignment_violations(&sub_inst, &placement).is_empty() {
        return Ok(None);
    }
    let flows = route_flows(&sub_inst, &placement)?;
    if !network_violations(&sub_inst, &flows).is_empty() {
        return Ok(None);
    }
    let report = power::evaluate(&sub_inst, &placement, &flows, weights)?;
    Ok(Some(Key::of(&report, weights)))
}

fn first_fit_decreasing(inst: &Instance<'_>, order: &[usize], servers: &[NodeId]) -> Option<Vec<usize>> {
    let mut cpu = vec![0.0; servers.len()];
    let mut ram = vec![0.0; servers.len()];
    let mut positions = Vec::with_capacity(order.len());
    for &vm in order {
        let req = &inst.workload.vms[vm];
        let slot = servers.iter().enumerate().position(|(i, s)| {
            let spec = inst.specs.server(s).expect("server spec");
            cpu[i] + req.cpu_ghz <= spec.cpu_ghz && ram[i] + req.ram_mb <= spec.ram_mb()
        })?;
        cpu[slot] += req.cpu_ghz;
        ram[slot] += req.ram_mb;
        positions.push(slot);
    }
    Some(positions)
}

pub fn solve_greedy(inst: &Instance<'_>, weights: &Weights) -> Result<Solution> {
    let order = inst.canonical_vm_order();
    let servers = inst.canonical_servers();
    let mut positions: Vec<usize> = Vec::with_capacity(order.len());
    let mut explored = 0u64;
    let mut dead_end = false;

    for _ in 0..order.len() {
        let mut best: Option<(Key, usize)> = None;
        for s in 0..servers.len() {
            explored += 1;
            positions.push(s);
            if let Some(k) = partial_key(inst, &order, &servers, &positions, weights)? {
                if best.is_none_or(|(b, _)| k.cmp(&b).is_lt()) {
                    best = Some((k, s));
                }
            }
            positions.pop();
        }
        match best {
            Some((_, s)) => positions.push(s),
            None => {
                dead_end = true;
                break;
            }
        }
    }

    if dead_end {
        log::debug!("greedy dead end after {} VMs, trying first-fit-decreasing", positions.len());
        match first_fit_decreasing(inst, &order, &servers) {
            Some(p) => positions = p,
            None => return Ok(Solution::infeasible(explored)),
        }
    }
    match score(inst, &order, &servers, &positions, weights)? {
        Some(c) => Ok(finish(Status::Feasible, Some(c), explored)),
        None => Ok(Solution::infeasible(explored)),
    }
}
