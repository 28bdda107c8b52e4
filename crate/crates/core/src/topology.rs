//! PON fog graph: per-cell passive stars around an AWGR hub, a full mesh
//! between hubs, and one uplink from every hub to the OLT.
//!
//! Routing is single-path: every ordered node pair gets the minimum-hop path,
//! with ties broken towards the lexicographically smallest node sequence.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// 32 wavelengths at 40 Gbps each.
pub const DEFAULT_LINK_CAPACITY_GBPS: f64 = 32.0 * 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    AccessOnu,
    ServerOnu,
    AwgrHub,
    Olt,
}

/// A node in the fog graph. Servers are identified with the ONU they hang off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub cell: Option<usize>,
    pub index: usize,
}

impl NodeId {
    pub fn access_onu(cell: usize, index: usize) -> Self {
        NodeId { kind: NodeKind::AccessOnu, cell: Some(cell), index }
    }

    pub fn server(cell: usize, index: usize) -> Self {
        NodeId { kind: NodeKind::ServerOnu, cell: Some(cell), index }
    }

    pub fn hub(cell: usize) -> Self {
        NodeId { kind: NodeKind::AwgrHub, cell: Some(cell), index: 0 }
    }

    pub fn olt() -> Self {
        NodeId { kind: NodeKind::Olt, cell: None, index: 0 }
    }

    pub fn is_server(&self) -> bool {
        self.kind == NodeKind::ServerOnu
    }
}

// The textual form doubles as an LP-safe identifier, so keep it to [a-z0-9_].
impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.cell) {
            (NodeKind::AccessOnu, Some(c)) => write!(f, "acc_c{}_i{}", c, self.index),
            (NodeKind::ServerOnu, Some(c)) => write!(f, "srv_c{}_i{}", c, self.index),
            (NodeKind::AwgrHub, Some(c)) => write!(f, "hub_c{}", c),
            (NodeKind::Olt, None) => write!(f, "olt{}", self.index),
            (kind, cell) => write!(f, "invalid_{:?}_{:?}_{}", kind, cell, self.index),
        }
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad node id '{s}'"));
        let num = |t: &str, prefix: char| -> Result<usize> {
            t.strip_prefix(prefix).and_then(|n| n.parse().ok()).ok_or_else(bad)
        };
        let parts: Vec<&str> = s.split('_').collect();
        match parts.as_slice() {
            ["acc", c, i] => Ok(NodeId::access_onu(num(c, 'c')?, num(i, 'i')?)),
            ["srv", c, i] => Ok(NodeId::server(num(c, 'c')?, num(i, 'i')?)),
            ["hub", c] => Ok(NodeId::hub(num(c, 'c')?)),
            [o] if o.starts_with("olt") => {
                let index = o[3..].parse().map_err(|_| bad())?;
                Ok(NodeId { kind: NodeKind::Olt, cell: None, index })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Undirected physical link; `a < b` always.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub capacity_gbps: f64,
}

impl Link {
    pub fn new(x: NodeId, y: NodeId, capacity_gbps: f64) -> Self {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        Link { a, b, capacity_gbps }
    }

    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    /// Visited nodes, source first.
    pub nodes: Vec<NodeId>,
    /// Indices into `Topology::links`, in travel order.
    pub links: Vec<usize>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.links.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub cells: usize,
    pub servers_per_cell: usize,
    pub access_onus_per_cell: usize,
    pub link_capacity_gbps: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            cells: 3,
            servers_per_cell: 5,
            access_onus_per_cell: 2,
            link_capacity_gbps: DEFAULT_LINK_CAPACITY_GBPS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Topology {
    config: TopologyConfig,
    nodes: Vec<NodeId>,
    node_index: HashMap<NodeId, usize>,
    links: Vec<Link>,
    /// Per node (dense index), `(neighbour, link index)` sorted by neighbour.
    adjacency: Vec<Vec<(NodeId, usize)>>,
    paths: BTreeMap<(NodeId, NodeId), Path>,
}

pub fn build_topology(
    cells: usize,
    servers_per_cell: usize,
    access_onus_per_cell: usize,
    link_capacity_gbps: f64,
) -> Result<Topology> {
    Topology::build(&TopologyConfig { cells, servers_per_cell, access_onus_per_cell, link_capacity_gbps })
}

impl Topology {
    pub fn build(config: &TopologyConfig) -> Result<Self> {
        if config.cells == 0 || config.servers_per_cell == 0 || config.access_onus_per_cell == 0 {
            return Err(Error::InvalidConfig(format!(
                "cell, server and access-ONU counts must be >= 1 (got {}, {}, {})",
                config.cells, config.servers_per_cell, config.access_onus_per_cell
            )));
        }
        if !(config.link_capacity_gbps > 0.0) || !config.link_capacity_gbps.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "link capacity must be positive and finite (got {})",
                config.link_capacity_gbps
            )));
        }
        let cap = config.link_capacity_gbps;

        let mut nodes = Vec::new();
        let mut links = Vec::new();
        for c in 0..config.cells {
            let hub = NodeId::hub(c);
            nodes.push(hub);
            for i in 0..config.servers_per_cell {
                let s = NodeId::server(c, i);
                nodes.push(s);
                links.push(Link::new(s, hub, cap));
            }
            for i in 0..config.access_onus_per_cell {
                let a = NodeId::access_onu(c, i);
                nodes.push(a);
                links.push(Link::new(a, hub, cap));
            }
            for other in 0..c {
                links.push(Link::new(NodeId::hub(other), hub, cap));
            }
            links.push(Link::new(hub, NodeId::olt(), cap));
        }
        nodes.push(NodeId::olt());
        nodes.sort();
        links.sort_by_key(|l| (l.a, l.b));

        let node_index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (li, l) in links.iter().enumerate() {
            adjacency[node_index[&l.a]].push((l.b, li));
            adjacency[node_index[&l.b]].push((l.a, li));
        }
        for adj in &mut adjacency {
            adj.sort();
        }

        let mut topo = Topology { config: config.clone(), nodes, node_index, links, adjacency, paths: BTreeMap::new() };
        topo.paths = topo.compute_paths();
        Ok(topo)
    }

    /// BFS distances towards each destination, then a greedy walk from every
    /// source that always steps to the smallest neighbour one hop closer.
    fn compute_paths(&self) -> BTreeMap<(NodeId, NodeId), Path> {
        let n = self.nodes.len();
        let mut paths = BTreeMap::new();
        for (di, &dst) in self.nodes.iter().enumerate() {
            let mut dist = vec![usize::MAX; n];
            dist[di] = 0;
            let mut queue = VecDeque::from([di]);
            while let Some(u) = queue.pop_front() {
                for &(nb, _) in &self.adjacency[u] {
                    let v = self.node_index[&nb];
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            for (si, &src) in self.nodes.iter().enumerate() {
                if si == di || dist[si] == usize::MAX {
                    continue;
                }
                let mut cur = si;
                let mut path = Path { nodes: vec![src], links: Vec::new() };
                while cur != di {
                    let &(nb, li) = self.adjacency[cur]
                        .iter()
                        .find(|(nb, _)| dist[self.node_index[nb]] + 1 == dist[cur])
                        .expect("BFS layer must have a predecessor");
                    path.nodes.push(nb);
                    path.links.push(li);
                    cur = self.node_index[&nb];
                }
                paths.insert((src, dst), path);
            }
        }
        paths
    }

    pub fn config(&self) -> &TopologyConfig {
        &self.config
    }

    pub fn cells(&self) -> usize {
        self.config.cells
    }

    /// All nodes in ascending `NodeId` order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, n: &NodeId) -> bool {
        self.node_index.contains_key(n)
    }

    /// Dense position of a node in `nodes()`.
    pub fn index_of(&self, n: &NodeId) -> Option<usize> {
        self.node_index.get(n).copied()
    }

    pub fn neighbours(&self, n: &NodeId) -> Result<&[(NodeId, usize)]> {
        let i = self.index_of(n).ok_or(Error::NodeNotFound(*n))?;
        Ok(&self.adjacency[i])
    }

    /// Servers in canonical order: cell-major, then index.
    pub fn servers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied().filter(|n| n.kind == NodeKind::ServerOnu)
    }

    pub fn access_onus(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied().filter(|n| n.kind == NodeKind::AccessOnu)
    }

    pub fn olts(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied().filter(|n| n.kind == NodeKind::Olt)
    }

    pub fn path_table(&self) -> &BTreeMap<(NodeId, NodeId), Path> {
        &self.paths
    }

    pub fn shortest_path(&self, s: &NodeId, d: &NodeId) -> Result<&Path> {
        for n in [s, d] {
            if !self.contains(n) {
                return Err(Error::NodeNotFound(*n));
            }
        }
        if s == d {
            return Err(Error::SameEndpoints(*s));
        }
        self.paths.get(&(*s, *d)).ok_or_else(|| Error::Contract(format!("no path from {s} to {d}")))
    }
}
