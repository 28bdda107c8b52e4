//! Depth-first branch-and-bound over VM-to-server assignments.
//!
//! VMs are branched in canonical order and servers tried in canonical order,
//! so the first optimum reached is the lexicographically smallest one. Only the
//! first empty server of each cell is branched on: servers in one cell share a
//! spec and a hub, so any other empty choice is a relabelling with an
//! identical objective and a larger assignment vector.
//!
//! The bound ignores routed network power beyond its placement-independent
//! floor, and relaxes processing power to a fractional fill of the remaining
//! CPU demand into residual server capacity, where an empty server's idle and
//! ONU power is spread over its full capacity.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::power::{self, canonical_sum, Weights};
use crate::solver::{finish, score, Candidate, Instance, Key, Solution, SolveOptions, Status};
use crate::topology::NodeId;

/// Relative slack on pruning; placement objectives that differ by less are
/// always scored exactly rather than cut.
const PRUNE_SLACK: f64 = 1e-9;
/// Absorbs summation-order rounding in the incremental capacity checks.
const FIT_SLACK: f64 = 1e-12;

struct ServerData {
    cpu: f64,
    ram: f64,
    slope: f64,
    /// Idle power plus the server ONU when switched on.
    fixed: f64,
    /// Per-GHz cost when the idle share is spread over full capacity.
    amortized: f64,
    /// Previous server of the same cell, if any.
    twin_of: Option<usize>,
}

struct Search<'a, 'i> {
    inst: &'a Instance<'i>,
    weights: Weights,
    order: Vec<usize>,
    servers: Vec<NodeId>,
    data: Vec<ServerData>,
    /// Remaining CPU / RAM demand from position `d` onwards.
    suffix_cpu: Vec<f64>,
    suffix_ram: Vec<f64>,
    /// `(rate, server, for_active_server)` sorted by rate.
    rates: Vec<(f64, usize, bool)>,
    load: Vec<f64>,
    load_ram: Vec<f64>,
    hosted: Vec<usize>,
    positions: Vec<usize>,
    network_floor: f64,
    best: Option<Candidate>,
    explored: u64,
    started: Instant,
    options: SolveOptions,
    aborted: bool,
}

impl Search<'_, '_> {
    fn fits(&self, s: usize, cpu: f64, ram: f64) -> bool {
        let d = &self.data[s];
        self.load[s] + cpu <= d.cpu * (1.0 + FIT_SLACK) + FIT_SLACK
            && self.load_ram[s] + ram <= d.ram * (1.0 + FIT_SLACK) + FIT_SLACK
    }

    fn partial_processing(&self) -> f64 {
        self.data
            .iter()
            .zip(&self.load)
            .zip(&self.hosted)
            .filter(|(_, &h)| h > 0)
            .map(|((d, l), _)| d.fixed + d.slope * l)
            .sum()
    }

    /// Lower bound on the processing power still to be added by VMs at `depth..`,
    /// or `None` if they cannot fit at all.
    fn remaining_bound(&self, depth: usize) -> Option<f64> {
        let need_cpu = self.suffix_cpu[depth];
        let need_ram = self.suffix_ram[depth];
        if need_cpu <= 0.0 {
            return Some(0.0);
        }
        let spare_ram: f64 = self.data.iter().zip(&self.load_ram).map(|(d, l)| d.ram - l).sum();
        if need_ram > spare_ram * (1.0 + FIT_SLACK) + FIT_SLACK {
            return None;
        }

        // fractional fill
        let mut left = need_cpu;
        let mut fill = 0.0;
        for &(rate, s, for_active) in &self.rates {
            if (self.hosted[s] > 0) != for_active {
                continue;
            }
            let room = (self.data[s].cpu - self.load[s]).max(0.0);
            let take = room.min(left);
            fill += rate * take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        if left > need_cpu * FIT_SLACK + FIT_SLACK {
            return None;
        }

        // each VM at its cheapest server with room for it on its own
        let mut per_vm = 0.0;
        for &vm in &self.order[depth..] {
            let req = &self.inst.workload.vms[vm];
            let rate = self
                .rates
                .iter()
                .find(|&&(_, s, for_active)| {
                    (self.hosted[s] > 0) == for_active && self.fits(s, req.cpu_ghz, req.ram_mb)
                })
                .map(|r| r.0)?;
            per_vm += rate * req.cpu_ghz;
        }
        Some(fill.max(per_vm))
    }

    fn prunable(&self, processing_lb: f64) -> bool {
        let Some(best) = &self.best else { return false };
        let slack = |x: f64| PRUNE_SLACK * x.abs().max(1.0);
        let Key(b0, b1) = best.key;
        if self.weights.lexicographic {
            let n = self.network_floor;
            n > b0 + slack(b0) || (n >= b0 && processing_lb > b1 + slack(b1))
        } else {
            let bound = self.weights.objective(self.network_floor, processing_lb);
            bound > b0 + slack(b0)
        }
    }

    fn dive(&mut self, depth: usize) -> Result<()> {
        self.explored += 1;
        if self.explored.is_multiple_of(4096) && self.started.elapsed() > self.options.time_budget {
            self.aborted = true;
        }
        if self.aborted {
            return Ok(());
        }
        if depth == self.order.len() {
            if let Some(c) = score(self.inst, &self.order, &self.servers, &self.positions, &self.weights)? {
                if self.best.as_ref().is_none_or(|b| c.beats(b)) {
                    self.best = Some(c);
                }
            }
            return Ok(());
        }
        let Some(rest) = self.remaining_bound(depth) else { return Ok(()) };
        if self.prunable(self.partial_processing() + rest) {
            return Ok(());
        }

        let vm = self.order[depth];
        let (cpu, ram) = {
            let req = &self.inst.workload.vms[vm];
            (req.cpu_ghz, req.ram_mb)
        };
        for s in 0..self.servers.len() {
            if self.hosted[s] == 0 {
                if let Some(t) = self.data[s].twin_of {
                    if self.hosted[t] == 0 {
                        continue;
                    }
                }
            }
            if !self.fits(s, cpu, ram) {
                continue;
            }
            self.load[s] += cpu;
            self.load_ram[s] += ram;
            self.hosted[s] += 1;
            self.positions.push(s);
            let r = self.dive(depth + 1);
            self.positions.pop();
            self.hosted[s] -= 1;
            self.load_ram[s] -= ram;
            self.load[s] -= cpu;
            // restore bit-exact sums when a server empties again
            if self.hosted[s] == 0 {
                self.load[s] = 0.0;
                self.load_ram[s] = 0.0;
            }
            r?;
            if self.aborted {
                break;
            }
        }
        Ok(())
    }
}

/// Network power that every placement pays: access ONUs at their fixed ingress
/// load and the OLT idling. `None` if an access ONU is over its line rate.
fn network_floor(inst: &Instance<'_>) -> Result<Option<f64>> {
    let mut values = Vec::new();
    for onu in inst.topology.access_onus() {
        let load: f64 =
            inst.workload.vms.iter().filter(|v| v.origin == onu && v.ingress_gbps > 0.0).map(|v| v.ingress_gbps).sum();
        if load > inst.specs.access_onu.rate_gbps {
            return Ok(None);
        }
        values.push(power::onu_power(&inst.specs.access_onu, load, true)?);
    }
    for _ in inst.topology.olts() {
        values.push(power::olt_power(&inst.specs.olt, 0.0)?);
    }
    Ok(Some(canonical_sum(values)))
}

fn candidate_from(inst: &Instance<'_>, sol: &Solution, weights: &Weights) -> Option<Candidate> {
    let placement = sol.placement.as_ref()?;
    let servers = inst.canonical_servers();
    let positions = inst
        .canonical_vm_order()
        .iter()
        .map(|vm| {
            let s = placement.server_of(*vm)?;
            servers.iter().position(|x| *x == s)
        })
        .collect::<Option<Vec<_>>>()?;
    let report = sol.report.clone()?;
    Some(Candidate {
        key: Key::of(&report, weights),
        positions,
        placement: placement.clone(),
        flows: sol.flows.clone()?,
        report,
    })
}

pub fn solve_bnb(inst: &Instance<'_>, weights: &Weights, options: SolveOptions) -> Result<Solution> {
    if !(weights.alpha >= 0.0 && weights.beta >= 0.0) {
        return Err(Error::InvalidConfig(format!("weights must be nonnegative: {weights:?}")));
    }
    let started = Instant::now();
    let Some(network_floor) = network_floor(inst)? else {
        return Ok(Solution::infeasible(0));
    };

    let order = inst.canonical_vm_order();
    let servers = inst.canonical_servers();
    let onu_on = power::onu_power(&inst.specs.server_onu, 0.0, true)?;
    let data: Vec<ServerData> = servers
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let spec = inst.specs.server(s).expect("validated instance");
            let fixed = spec.idle_w + onu_on;
            let twin_of = (i > 0 && servers[i - 1].cell == s.cell).then(|| i - 1);
            ServerData {
                cpu: spec.cpu_ghz,
                ram: spec.ram_mb(),
                slope: spec.slope(),
                fixed,
                amortized: spec.slope() + fixed / spec.cpu_ghz,
                twin_of,
            }
        })
        .collect();
    let mut rates: Vec<(f64, usize, bool)> =
        data.iter().enumerate().flat_map(|(s, d)| [(d.slope, s, true), (d.amortized, s, false)]).collect();
    rates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = order.len();
    let mut suffix_cpu = vec![0.0; n + 1];
    let mut suffix_ram = vec![0.0; n + 1];
    for d in (0..n).rev() {
        let vm = &inst.workload.vms[order[d]];
        suffix_cpu[d] = suffix_cpu[d + 1] + vm.cpu_ghz;
        suffix_ram[d] = suffix_ram[d + 1] + vm.ram_mb;
    }

    let greedy = crate::solver::solve_greedy(inst, weights)?;
    let best = candidate_from(inst, &greedy, weights);

    let s = servers.len();
    let mut search = Search {
        inst,
        weights: *weights,
        order,
        servers,
        data,
        suffix_cpu,
        suffix_ram,
        rates,
        load: vec![0.0; s],
        load_ram: vec![0.0; s],
        hosted: vec![0; s],
        positions: Vec::with_capacity(n),
        network_floor,
        best,
        explored: 0,
        started,
        options,
        aborted: false,
    };
    search.dive(0)?;
    let status = match (search.aborted, search.best.is_some()) {
        (true, _) => Status::Aborted,
        (false, true) => Status::Optimal,
        (false, false) => Status::Infeasible,
    };
    Ok(finish(status, search.best, search.explored))
}
