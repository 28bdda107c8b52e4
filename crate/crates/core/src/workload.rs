//! VM request sets and the inter-VM traffic matrix.
//!
//! Generation is a pure function of the config and seed: every field is drawn
//! uniformly from its range using a ChaCha8 stream in a fixed order (per VM:
//! cpu, ram, optional ingress; then every ordered pair in row-major order).

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::DeviceSpecs;
use crate::topology::{NodeId, NodeKind, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmRequest {
    pub id: usize,
    pub cpu_ghz: f64,
    pub ram_mb: f64,
    pub origin: NodeId,
    #[serde(default)]
    pub ingress_gbps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficEntry {
    pub from: usize,
    pub to: usize,
    pub gbps: f64,
}

/// Directed traffic demands between VM pairs, keyed `(from, to)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrafficMatrix {
    entries: BTreeMap<(usize, usize), f64>,
}

impl TrafficMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts without validation; `validate_workload` reports bad entries.
    pub fn insert(&mut self, from: usize, to: usize, gbps: f64) {
        self.entries.insert((from, to), gbps);
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Serialize for TrafficMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<TrafficEntry> = self.iter().map(|((from, to), gbps)| TrafficEntry { from, to, gbps }).collect();
        list.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TrafficMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<TrafficEntry>::deserialize(deserializer)?;
        let mut m = TrafficMatrix::new();
        for e in list {
            m.insert(e.from, e.to, e.gbps);
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub seed: u64,
    pub vms: Vec<VmRequest>,
    #[serde(default)]
    pub traffic: TrafficMatrix,
}

impl Workload {
    pub fn empty() -> Self {
        Workload { seed: 0, vms: Vec::new(), traffic: TrafficMatrix::new() }
    }

    pub fn total_cpu_ghz(&self) -> f64 {
        self.vms.iter().map(|v| v.cpu_ghz).sum()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub cpu_range: [f64; 2],
    pub ram_range: [f64; 2],
    pub traffic_range: [f64; 2],
    pub traffic_density: f64,
    /// Draw per-VM end-user ingress from `traffic_range` instead of using zero.
    pub ingress: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            cpu_range: [0.1, 2.6],
            ram_range: [100.0, 500.0],
            traffic_range: [1.0, 5.0],
            traffic_density: 0.2,
            ingress: false,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in
            [("cpu_range", self.cpu_range), ("ram_range", self.ram_range), ("traffic_range", self.traffic_range)]
        {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(format!("{name} [{lo}, {hi}] is empty")));
            }
        }
        if !(self.cpu_range[0] > 0.0 && self.ram_range[0] > 0.0 && self.traffic_range[0] >= 0.0) {
            return Err(Error::InvalidConfig("cpu and ram ranges must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.traffic_density) {
            return Err(Error::InvalidConfig(format!("traffic_density {} outside [0, 1]", self.traffic_density)));
        }
        Ok(())
    }

    /// A warning when some requests may not fit on any server at all.
    pub fn capacity_warning(&self, specs: &DeviceSpecs) -> Option<String> {
        let max = specs.max_server_cpu();
        (self.cpu_range[1] > max).then(|| {
            format!(
                "cpu_range upper bound {} GHz exceeds every server ({} GHz); some instances will be infeasible",
                self.cpu_range[1], max
            )
        })
    }
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

pub fn generate_workload(n_vms: usize, cfg: &WorkloadConfig, topology: &Topology, seed: u64) -> Result<Workload> {
    cfg.validate()?;
    let onus: Vec<NodeId> = topology.access_onus().collect();
    if onus.is_empty() {
        return Err(Error::InvalidConfig("topology has no access ONUs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vms = (0..n_vms)
        .map(|id| {
            let cpu_ghz = draw(&mut rng, cfg.cpu_range);
            let ram_mb = draw(&mut rng, cfg.ram_range);
            let ingress_gbps = if cfg.ingress { draw(&mut rng, cfg.traffic_range) } else { 0.0 };
            VmRequest { id, cpu_ghz, ram_mb, origin: onus[id % onus.len()], ingress_gbps }
        })
        .collect();
    let mut traffic = TrafficMatrix::new();
    for from in 0..n_vms {
        for to in 0..n_vms {
            if from != to && rng.gen_bool(cfg.traffic_density) {
                traffic.insert(from, to, draw(&mut rng, cfg.traffic_range));
            }
        }
    }
    Ok(Workload { seed, vms, traffic })
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadViolation {
    IdGap { position: usize, id: usize },
    NonPositiveCpu { vm: usize, cpu_ghz: f64 },
    CpuExceedsLargestServer { vm: usize, cpu_ghz: f64, max_ghz: f64 },
    NonPositiveRam { vm: usize, ram_mb: f64 },
    RamExceedsLargestServer { vm: usize, ram_mb: f64, max_mb: f64 },
    NegativeIngress { vm: usize, gbps: f64 },
    UnknownOrigin { vm: usize, origin: NodeId },
    SelfTraffic { vm: usize },
    NegativeTraffic { from: usize, to: usize, gbps: f64 },
    UnknownTrafficEndpoint { from: usize, to: usize },
}

impl fmt::Display for WorkloadViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use WorkloadViolation::*;
        match self {
            IdGap { position, id } => write!(f, "VM at position {position} has id {id}"),
            NonPositiveCpu { vm, cpu_ghz } => write!(f, "VM {vm}: cpu {cpu_ghz} GHz is not positive"),
            CpuExceedsLargestServer { vm, cpu_ghz, max_ghz } => {
                write!(f, "VM {vm}: cpu {cpu_ghz} GHz exceeds largest server ({max_ghz} GHz)")
            }
            NonPositiveRam { vm, ram_mb } => write!(f, "VM {vm}: ram {ram_mb} MB is not positive"),
            RamExceedsLargestServer { vm, ram_mb, max_mb } => {
                write!(f, "VM {vm}: ram {ram_mb} MB exceeds largest server ({max_mb} MB)")
            }
            NegativeIngress { vm, gbps } => write!(f, "VM {vm}: negative ingress {gbps} Gbps"),
            UnknownOrigin { vm, origin } => write!(f, "VM {vm}: origin {origin} is not an access ONU"),
            SelfTraffic { vm } => write!(f, "traffic entry ({vm}, {vm}) is self-traffic"),
            NegativeTraffic { from, to, gbps } => write!(f, "traffic ({from}, {to}) is negative: {gbps}"),
            UnknownTrafficEndpoint { from, to } => write!(f, "traffic ({from}, {to}) names an unknown VM"),
        }
    }
}

pub fn validate_workload(w: &Workload, t: &Topology, specs: &DeviceSpecs) -> Vec<WorkloadViolation> {
    use WorkloadViolation::*;
    let mut out = Vec::new();
    let max_ghz = specs.max_server_cpu();
    let max_mb = specs.max_server_ram_mb();
    for (position, vm) in w.vms.iter().enumerate() {
        if vm.id != position {
            out.push(IdGap { position, id: vm.id });
        }
        if !(vm.cpu_ghz > 0.0) {
            out.push(NonPositiveCpu { vm: vm.id, cpu_ghz: vm.cpu_ghz });
        } else if vm.cpu_ghz > max_ghz {
            out.push(CpuExceedsLargestServer { vm: vm.id, cpu_ghz: vm.cpu_ghz, max_ghz });
        }
        if !(vm.ram_mb > 0.0) {
            out.push(NonPositiveRam { vm: vm.id, ram_mb: vm.ram_mb });
        } else if vm.ram_mb > max_mb {
            out.push(RamExceedsLargestServer { vm: vm.id, ram_mb: vm.ram_mb, max_mb });
        }
        if !(vm.ingress_gbps >= 0.0) {
            out.push(NegativeIngress { vm: vm.id, gbps: vm.ingress_gbps });
        }
        if vm.origin.kind != NodeKind::AccessOnu || !t.contains(&vm.origin) {
            out.push(UnknownOrigin { vm: vm.id, origin: vm.origin });
        }
    }
    let n = w.vms.len();
    for ((from, to), gbps) in w.traffic.iter() {
        if from == to {
            out.push(SelfTraffic { vm: from });
        }
        if from >= n || to >= n {
            out.push(UnknownTrafficEndpoint { from, to });
        }
        if !(gbps >= 0.0) {
            out.push(NegativeTraffic { from, to, gbps });
        }
    }
    out
}
