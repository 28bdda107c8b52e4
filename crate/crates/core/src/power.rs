//! Device power models and the networking / processing aggregates of the
//! weighted objective.
//!
//! Servers and load-proportional devices interpolate linearly between idle and
//! maximum power. Server-side ONUs are plain transceivers with an on/off profile.
//! AWGR hubs are passive and never appear in a report.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::solver::routing::FlowAssignment;
use crate::solver::{Instance, Placement};
use crate::topology::{NodeId, NodeKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    #[serde(default)]
    pub name: String,
    pub max_w: f64,
    pub idle_w: f64,
    pub cpu_ghz: f64,
    pub ram_gb: f64,
}

impl ServerSpec {
    /// Dell PowerEdge R620, the energy-efficient cell.
    pub fn r620() -> Self {
        ServerSpec { name: "R620".into(), max_w: 243.0, idle_w: 54.1, cpu_ghz: 2.6, ram_gb: 24.0 }
    }

    /// Dell PowerEdge R740, the least efficient cell.
    pub fn r740() -> Self {
        ServerSpec { name: "R740".into(), max_w: 457.0, idle_w: 301.0, cpu_ghz: 2.5, ram_gb: 16.0 }
    }

    /// Hitachi HA8000/RS220-hHM, mid-range efficiency.
    pub fn ha8000() -> Self {
        ServerSpec { name: "HA8000".into(), max_w: 325.0, idle_w: 104.0, cpu_ghz: 2.4, ram_gb: 32.0 }
    }

    pub fn ram_mb(&self) -> f64 {
        self.ram_gb * 1024.0
    }

    /// Watts per GHz of assigned load.
    pub fn slope(&self) -> f64 {
        (self.max_w - self.idle_w) / self.cpu_ghz
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.idle_w >= 0.0
            && self.idle_w <= self.max_w
            && self.max_w.is_finite()
            && self.cpu_ghz > 0.0
            && self.cpu_ghz.is_finite()
            && self.ram_gb > 0.0
            && self.ram_gb.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad server spec {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnuProfile {
    OnOff,
    Proportional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnuSpec {
    pub max_w: f64,
    pub idle_w: f64,
    pub rate_gbps: f64,
    pub profile: OnuProfile,
}

impl OnuSpec {
    pub fn table(profile: OnuProfile) -> Self {
        OnuSpec { max_w: 2.5, idle_w: 1.5, rate_gbps: 10.0, profile }
    }

    pub fn validate(&self) -> Result<()> {
        if self.idle_w >= 0.0 && self.idle_w <= self.max_w && self.max_w.is_finite() && self.rate_gbps > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad ONU spec {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OltSpec {
    pub max_w: f64,
    pub idle_w: f64,
    pub rate_gbps: f64,
}

impl Default for OltSpec {
    fn default() -> Self {
        OltSpec { max_w: 1940.0, idle_w: 1746.0, rate_gbps: 8600.0 }
    }
}

impl OltSpec {
    pub fn validate(&self) -> Result<()> {
        if self.idle_w >= 0.0 && self.idle_w <= self.max_w && self.max_w.is_finite() && self.rate_gbps > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad OLT spec {self:?}")))
        }
    }
}

/// Every powered device model in the system. `cells[c]` describes the servers of cell `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSpecs {
    pub cells: Vec<ServerSpec>,
    pub server_onu: OnuSpec,
    pub access_onu: OnuSpec,
    pub olt: OltSpec,
}

impl Default for DeviceSpecs {
    fn default() -> Self {
        DeviceSpecs {
            cells: vec![ServerSpec::r620(), ServerSpec::r740(), ServerSpec::ha8000()],
            server_onu: OnuSpec::table(OnuProfile::OnOff),
            access_onu: OnuSpec::table(OnuProfile::Proportional),
            olt: OltSpec::default(),
        }
    }
}

impl DeviceSpecs {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidConfig("no server specs".into()));
        }
        self.cells.iter().try_for_each(ServerSpec::validate)?;
        self.server_onu.validate()?;
        self.access_onu.validate()?;
        self.olt.validate()
    }

    pub fn server(&self, node: &NodeId) -> Option<&ServerSpec> {
        match (node.kind, node.cell) {
            (NodeKind::ServerOnu, Some(c)) => self.cells.get(c),
            _ => None,
        }
    }

    pub fn max_server_cpu(&self) -> f64 {
        self.cells.iter().map(|s| s.cpu_ghz).fold(0.0, f64::max)
    }

    pub fn max_server_ram_mb(&self) -> f64 {
        self.cells.iter().map(ServerSpec::ram_mb).fold(0.0, f64::max)
    }
}

/// Objective weights: networking power is scaled by `alpha`, processing by `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    /// Rank by networking power first and processing power second, ignoring
    /// the numeric weights (which are still used for the reported objective).
    #[serde(default)]
    pub lexicographic: bool,
}

impl Weights {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Weights { alpha, beta, lexicographic: false }
    }

    pub fn equal() -> Self {
        Weights::new(1.0, 1.0)
    }

    pub fn objective(&self, n_pc_w: f64, p_pc_w: f64) -> f64 {
        self.alpha * n_pc_w + self.beta * p_pc_w
    }
}

fn ratio(load: f64, capacity: f64, device: &str) -> Result<f64> {
    if !(load >= 0.0) || load > capacity {
        return Err(Error::Domain { device: device.to_string(), load, capacity });
    }
    Ok(load / capacity)
}

pub fn server_power(spec: &ServerSpec, assigned_cpu_ghz: f64, active: bool) -> Result<f64> {
    let u = ratio(assigned_cpu_ghz, spec.cpu_ghz, &spec.name)?;
    if !active {
        if assigned_cpu_ghz > 0.0 {
            return Err(Error::Contract(format!("{} is off but carries load", spec.name)));
        }
        return Ok(0.0);
    }
    Ok(spec.idle_w + (spec.max_w - spec.idle_w) * u)
}

/// On/off ONUs ignore traffic; the rate limit only binds for proportional ONUs.
pub fn onu_power(spec: &OnuSpec, traffic_gbps: f64, active: bool) -> Result<f64> {
    match spec.profile {
        OnuProfile::OnOff => Ok(if active { spec.max_w } else { 0.0 }),
        OnuProfile::Proportional => {
            let u = ratio(traffic_gbps, spec.rate_gbps, "access ONU")?;
            Ok(spec.idle_w + (spec.max_w - spec.idle_w) * u)
        }
    }
}

pub fn olt_power(spec: &OltSpec, traffic_gbps: f64) -> Result<f64> {
    let u = ratio(traffic_gbps, spec.rate_gbps, "OLT")?;
    Ok(spec.idle_w + (spec.max_w - spec.idle_w) * u)
}

/// Order-independent summation: identical multisets give bit-identical totals,
/// so placements that differ only by relabelling twin servers tie exactly.
pub(crate) fn canonical_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeviceRole {
    Server,
    Onu,
    Olt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Device {
    pub node: NodeId,
    pub role: DeviceRole,
}

impl Device {
    /// Access ONUs and the OLT form the networking layer; servers and their
    /// ONUs the processing layer.
    pub fn is_network(&self) -> bool {
        match self.role {
            DeviceRole::Olt => true,
            DeviceRole::Onu => self.node.kind == NodeKind::AccessOnu,
            DeviceRole::Server => false,
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            DeviceRole::Server => "server",
            DeviceRole::Onu => "onu",
            DeviceRole::Olt => "olt",
        };
        write!(f, "{role}:{}", self.node)
    }
}

impl Serialize for Device {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerReport {
    pub n_pc_w: f64,
    pub p_pc_w: f64,
    pub objective: f64,
    pub alpha: f64,
    pub beta: f64,
    pub per_device_w: BTreeMap<Device, f64>,
    pub per_cell_w: BTreeMap<usize, f64>,
    /// Assigned CPU over capacity, per server.
    pub server_utilization: BTreeMap<NodeId, f64>,
    /// Assigned CPU in GHz, per cell.
    pub cell_cpu_ghz: BTreeMap<usize, f64>,
}

impl PowerReport {
    pub fn total_w(&self) -> f64 {
        self.n_pc_w + self.p_pc_w
    }
}

/// Evaluate the weighted objective for a complete placement and its routed flows.
pub fn evaluate(
    inst: &Instance<'_>,
    placement: &Placement,
    flows: &FlowAssignment,
    weights: &Weights,
) -> Result<PowerReport> {
    let topo = inst.topology;
    let vms = &inst.workload.vms;
    if placement.assign.len() != vms.len() {
        return Err(Error::Contract(format!("placement covers {} of {} VMs", placement.assign.len(), vms.len())));
    }
    if flows.link_load.len() != topo.links().len() {
        return Err(Error::Contract("flow assignment does not match topology".into()));
    }

    let mut load: BTreeMap<NodeId, f64> = topo.servers().map(|s| (s, 0.0)).collect();
    let mut hosted: BTreeMap<NodeId, usize> = BTreeMap::new();
    for vm in vms {
        let server = placement.assign.get(&vm.id).ok_or_else(|| Error::Contract(format!("VM {} unassigned", vm.id)))?;
        let slot =
            load.get_mut(server).ok_or_else(|| Error::Contract(format!("VM {} on unknown server {server}", vm.id)))?;
        *slot += vm.cpu_ghz;
        *hosted.entry(*server).or_default() += 1;
    }

    let mut per_device = BTreeMap::new();
    let mut utilization = BTreeMap::new();
    let mut cell_cpu: BTreeMap<usize, f64> = (0..topo.cells()).map(|c| (c, 0.0)).collect();
    for (&server, &ghz) in &load {
        let spec = inst.specs.server(&server).ok_or_else(|| Error::Contract(format!("no spec for {server}")))?;
        let active = hosted.contains_key(&server);
        per_device.insert(Device { node: server, role: DeviceRole::Server }, server_power(spec, ghz, active)?);
        let onu_active = active || flows.throughput(&server) > 0.0;
        per_device.insert(
            Device { node: server, role: DeviceRole::Onu },
            onu_power(&inst.specs.server_onu, flows.throughput(&server), onu_active)?,
        );
        utilization.insert(server, ghz / spec.cpu_ghz);
        *cell_cpu.entry(server.cell.unwrap_or(0)).or_default() += ghz;
    }
    for onu in topo.access_onus() {
        per_device.insert(
            Device { node: onu, role: DeviceRole::Onu },
            onu_power(&inst.specs.access_onu, flows.throughput(&onu), true)?,
        );
    }
    for olt in topo.olts() {
        per_device
            .insert(Device { node: olt, role: DeviceRole::Olt }, olt_power(&inst.specs.olt, flows.throughput(&olt))?);
    }

    let n_pc_w = canonical_sum(per_device.iter().filter(|(d, _)| d.is_network()).map(|(_, w)| *w));
    let p_pc_w = canonical_sum(per_device.iter().filter(|(d, _)| !d.is_network()).map(|(_, w)| *w));
    let mut per_cell: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (d, w) in &per_device {
        if let Some(c) = d.node.cell {
            per_cell.entry(c).or_default().push(*w);
        }
    }
    Ok(PowerReport {
        n_pc_w,
        p_pc_w,
        objective: weights.objective(n_pc_w, p_pc_w),
        alpha: weights.alpha,
        beta: weights.beta,
        per_device_w: per_device,
        per_cell_w: per_cell.into_iter().map(|(c, v)| (c, canonical_sum(v))).collect(),
        server_utilization: utilization,
        cell_cpu_ghz: cell_cpu,
    })
}
