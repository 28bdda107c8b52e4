//! Exhaustive enumeration, used as ground truth for the exact solver.

use crate::error::{Error, Result};
use crate::power::Weights;
use crate::solver::{finish, score, Candidate, Instance, Solution, Status};

pub const DEFAULT_ORACLE_CAP: u64 = 10_000_000;

/// Scores every total assignment in lexicographic order (first canonical VM
/// most significant) and keeps the first strict minimum.
pub fn solve_bruteforce(inst: &Instance<'_>, weights: &Weights, cap: u64) -> Result<Solution> {
    let order = inst.canonical_vm_order();
    let servers = inst.canonical_servers();
    let (n, s) = (order.len(), servers.len());
    let candidates = (s as f64).powi(n as i32);
    if candidates > cap as f64 {
        return Err(Error::OracleScope { candidates, cap });
    }

    let mut positions = vec![0usize; n];
    let mut best: Option<Candidate> = None;
    let mut explored = 0u64;
    loop {
        explored += 1;
        if let Some(c) = score(inst, &order, &servers, &positions, weights)? {
            if best.as_ref().is_none_or(|b| c.key.cmp(&b.key).is_lt()) {
                best = Some(c);
            }
        }
        // odometer, least significant digit last
        let mut i = n;
        loop {
            if i == 0 {
                let status = if best.is_some() { Status::Optimal } else { Status::Infeasible };
                return Ok(finish(status, best, explored));
            }
            i -= 1;
            positions[i] += 1;
            if positions[i] < s {
                break;
            }
            positions[i] = 0;
        }
    }
}
