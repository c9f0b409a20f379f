//! Multi-rooted tree topologies. Only the k-pod fat-tree builder exists, but
//! the graph itself (layers, ports, directed links) is generic.
//!
//! Wiring convention: the aggregate switch at pod position `j` connects to
//! every core of group `j`, and core `(j, i)` sits on port `k/2 + i` of each
//! such aggregate. Mirror-link recommendations depend on this positional
//! correspondence.

mod dump;
mod routing;

pub use dump::TopologyDump;
pub use routing::{iter_mask, PortMask, Routing, UNREACHABLE};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimTime;

/// Default link rate: 1 Gbps.
pub const DEFAULT_CAPACITY_BPS: u64 = 1_000_000_000;
/// Default one-way propagation delay: 0.01 ms.
pub const DEFAULT_DELAY: SimTime = SimTime::from_micros(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Host,
    Edge,
    Aggregate,
    Core,
}

/// Structural identity of a node. Indices are zero based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Host { pod: u16, edge: u16, pos: u16 },
    Edge { pod: u16, pos: u16 },
    Aggregate { pod: u16, pos: u16 },
    Core { group: u16, pos: u16 },
}

impl Node {
    pub fn layer(self) -> Layer {
        match self {
            Node::Host { .. } => Layer::Host,
            Node::Edge { .. } => Layer::Edge,
            Node::Aggregate { .. } => Layer::Aggregate,
            Node::Core { .. } => Layer::Core,
        }
    }

    pub fn pod(self) -> Option<usize> {
        match self {
            Node::Host { pod, .. } | Node::Edge { pod, .. } | Node::Aggregate { pod, .. } => {
                Some(pod as usize)
            }
            Node::Core { .. } => None,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Node::Host { pod, edge, pos } => write!(f, "host[{pod}.{edge}.{pos}]"),
            Node::Edge { pod, pos } => write!(f, "edge[{pod}.{pos}]"),
            Node::Aggregate { pod, pos } => write!(f, "aggr[{pod}.{pos}]"),
            Node::Core { group, pos } => write!(f, "core[{group}.{pos}]"),
        }
    }
}

/// Dense node index. Hosts come first, so a host's id equals its host index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense index of a directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    /// Port number of this link at `from`.
    pub from_port: u16,
    /// Port number of this link at `to`.
    pub to_port: u16,
    pub capacity_bps: u64,
    pub delay: SimTime,
    /// The opposite direction of the same cable.
    pub reverse: LinkId,
}

/// One attachment point of a node: the neighbour and both link directions.
#[derive(Debug, Clone, Copy)]
pub struct Port {
    pub peer: NodeId,
    pub out_link: LinkId,
    pub in_link: LinkId,
}

/// Identifies an inter-pod path by its apex core or by its uphill aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSpec {
    pub core: Option<NodeId>,
    pub uphill_aggregate: Option<NodeId>,
}

impl PathSpec {
    pub fn via_core(core: NodeId) -> Self {
        PathSpec {
            core: Some(core),
            uphill_aggregate: None,
        }
    }

    pub fn via_aggregate(aggr: NodeId) -> Self {
        PathSpec {
            core: None,
            uphill_aggregate: Some(aggr),
        }
    }

    /// The node a switch must be adjacent to in order to apply this
    /// recommendation.
    pub fn target(&self) -> NodeId {
        self.core
            .or(self.uphill_aggregate)
            .expect("PathSpec without core or aggregate")
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    k: usize,
    nodes: Vec<Node>,
    links: Vec<Link>,
    ports: Vec<Vec<Port>>,
    edges: Vec<NodeId>,
    aggregates: Vec<NodeId>,
    cores: Vec<NodeId>,
}

impl Topology {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn half(&self) -> usize {
        self.k / 2
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_hosts(&self) -> usize {
        self.k * self.k * self.k / 4
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, Node)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), *n))
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &Link)> + '_ {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| (LinkId(i as u32), l))
    }

    pub fn ports(&self, id: NodeId) -> &[Port] {
        &self.ports[id.index()]
    }

    pub fn port(&self, id: NodeId, port: usize) -> &Port {
        &self.ports[id.index()][port]
    }

    pub fn hosts(&self) -> impl Iterator<Item = NodeId> {
        (0..self.num_hosts() as u32).map(NodeId)
    }

    pub fn host(&self, index: usize) -> NodeId {
        assert!(index < self.num_hosts(), "host index {index} out of range");
        NodeId(index as u32)
    }

    pub fn is_host(&self, id: NodeId) -> bool {
        id.index() < self.num_hosts()
    }

    pub fn edges(&self) -> &[NodeId] {
        &self.edges
    }

    pub fn aggregates(&self) -> &[NodeId] {
        &self.aggregates
    }

    pub fn cores(&self) -> &[NodeId] {
        &self.cores
    }

    /// All switches: edges, then aggregates, then cores.
    pub fn switches(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.edges
            .iter()
            .chain(self.aggregates.iter())
            .chain(self.cores.iter())
            .copied()
    }

    /// Position of a switch in [`Topology::switches`] order.
    pub fn switch_index(&self, id: NodeId) -> usize {
        let i = id.index();
        assert!(i >= self.num_hosts(), "{} is not a switch", self.node(id));
        i - self.num_hosts()
    }

    pub fn num_switches(&self) -> usize {
        self.nodes.len() - self.num_hosts()
    }

    pub fn edge_index(&self, id: NodeId) -> usize {
        match self.node(id) {
            Node::Edge { pod, pos } => pod as usize * self.half() + pos as usize,
            n => panic!("{n} is not an edge switch"),
        }
    }

    pub fn edge_of_host(&self, host: NodeId) -> NodeId {
        self.ports(host)[0].peer
    }

    pub fn pod_of(&self, id: NodeId) -> Option<usize> {
        self.node(id).pod()
    }

    pub fn find(&self, node: Node) -> Option<NodeId> {
        let h = self.half() as u16;
        let k = self.k as u16;
        let idx = match node {
            Node::Host { pod, edge, pos } if pod < k && edge < h && pos < h => {
                (pod as usize * self.half() + edge as usize) * self.half() + pos as usize
            }
            Node::Edge { pod, pos } if pod < k && pos < h => {
                self.num_hosts() + pod as usize * self.half() + pos as usize
            }
            Node::Aggregate { pod, pos } if pod < k && pos < h => {
                self.num_hosts() + self.edges.len() + pod as usize * self.half() + pos as usize
            }
            Node::Core { group, pos } if group < h && pos < h => {
                self.num_hosts()
                    + self.edges.len()
                    + self.aggregates.len()
                    + group as usize * self.half()
                    + pos as usize
            }
            _ => return None,
        };
        Some(NodeId(idx as u32))
    }

    pub fn id(&self, node: Node) -> Result<NodeId> {
        self.find(node)
            .ok_or_else(|| Error::config("node", format!("{node} does not exist (k={})", self.k)))
    }

    pub fn edge_switch(&self, pod: usize, pos: usize) -> NodeId {
        self.find(Node::Edge {
            pod: pod as u16,
            pos: pos as u16,
        })
        .expect("edge switch out of range")
    }

    pub fn aggregate_switch(&self, pod: usize, pos: usize) -> NodeId {
        self.find(Node::Aggregate {
            pod: pod as u16,
            pos: pos as u16,
        })
        .expect("aggregate switch out of range")
    }

    pub fn core_switch(&self, group: usize, pos: usize) -> NodeId {
        self.find(Node::Core {
            group: group as u16,
            pos: pos as u16,
        })
        .expect("core switch out of range")
    }

    pub fn host_at(&self, pod: usize, edge: usize, pos: usize) -> NodeId {
        self.find(Node::Host {
            pod: pod as u16,
            edge: edge as u16,
            pos: pos as u16,
        })
        .expect("host out of range")
    }

    /// Port of `node` whose peer is `peer`.
    pub fn port_towards(&self, node: NodeId, peer: NodeId) -> Option<usize> {
        self.ports(node).iter().position(|p| p.peer == peer)
    }

    /// Directed link `from -> to`, if the two nodes are adjacent.
    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.port_towards(from, to)
            .map(|p| self.ports(from)[p].out_link)
    }

    /// Whether the link points up the tree (host->edge, edge->aggr, aggr->core).
    pub fn is_uplink(&self, link: LinkId) -> bool {
        let l = self.link(link);
        self.node(l.from).layer() < self.node(l.to).layer()
    }

    /// Enumerate the equal-cost shortest paths between two hosts as link
    /// sequences, on the fully operational topology.
    pub fn equal_cost_paths(&self, src: NodeId, dst: NodeId) -> Result<Vec<Vec<LinkId>>> {
        if src.index() >= self.nodes.len() || !self.is_host(src) {
            return Err(Error::config("src", format!("{src:?} is not a host")));
        }
        if dst.index() >= self.nodes.len() || !self.is_host(dst) {
            return Err(Error::config("dst", format!("{dst:?} is not a host")));
        }
        if src == dst {
            return Err(Error::config(
                "dst",
                "source and destination are the same host",
            ));
        }
        let routing = Routing::new(self, &vec![true; self.num_links()]);
        Ok(routing.shortest_paths(self, src, dst))
    }

    /// The path recommendation that makes a flow from `source_pod` arrive at
    /// `downhill_switch` over `incoming`.
    ///
    /// For an aggregate this is the core at the far end of the link; for an
    /// edge it is the aggregate in the source pod at the same position as the
    /// link's aggregate.
    pub fn mirror_uplink(
        &self,
        downhill_switch: NodeId,
        incoming: LinkId,
        source_pod: usize,
    ) -> Result<PathSpec> {
        let link = self.link(incoming);
        if link.to != downhill_switch {
            return Err(Error::internal(format!(
                "link {:?} is not an incoming link of {}",
                incoming,
                self.node(downhill_switch)
            )));
        }
        match (self.node(downhill_switch), self.node(link.from)) {
            (Node::Aggregate { .. }, Node::Core { .. }) => Ok(PathSpec::via_core(link.from)),
            (Node::Edge { .. }, Node::Aggregate { pos, .. }) => {
                if source_pod >= self.k {
                    return Err(Error::internal(format!("pod {source_pod} out of range")));
                }
                Ok(PathSpec::via_aggregate(
                    self.aggregate_switch(source_pod, pos as usize),
                ))
            }
            (s, from) => Err(Error::internal(format!(
                "no mirror uplink for {from} -> {s}: not a downhill aggregate or edge link"
            ))),
        }
    }
}

/// Link parameters for [`build_fat_tree_with`].
#[derive(Debug, Clone, Copy)]
pub struct LinkParams {
    pub capacity_bps: u64,
    pub delay: SimTime,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            capacity_bps: DEFAULT_CAPACITY_BPS,
            delay: DEFAULT_DELAY,
        }
    }
}

pub fn build_fat_tree(k: usize) -> Result<Topology> {
    build_fat_tree_with(k, LinkParams::default())
}

pub fn build_fat_tree_with(k: usize, params: LinkParams) -> Result<Topology> {
    if k < 4 || k % 2 != 0 {
        return Err(Error::config(
            "k",
            format!("must be even and >= 4, got {k}"),
        ));
    }
    if k > 64 {
        return Err(Error::config(
            "k",
            format!("at most 64 ports supported, got {k}"),
        ));
    }
    if params.capacity_bps == 0 {
        return Err(Error::config("link_capacity", "must be positive"));
    }
    if params.delay == SimTime::ZERO {
        return Err(Error::config("link_delay", "must be positive"));
    }

    let h = k / 2;
    let mut nodes = Vec::new();
    for pod in 0..k {
        for edge in 0..h {
            for pos in 0..h {
                nodes.push(Node::Host {
                    pod: pod as u16,
                    edge: edge as u16,
                    pos: pos as u16,
                });
            }
        }
    }
    let mut edges = Vec::new();
    for pod in 0..k {
        for pos in 0..h {
            edges.push(NodeId(nodes.len() as u32));
            nodes.push(Node::Edge {
                pod: pod as u16,
                pos: pos as u16,
            });
        }
    }
    let mut aggregates = Vec::new();
    for pod in 0..k {
        for pos in 0..h {
            aggregates.push(NodeId(nodes.len() as u32));
            nodes.push(Node::Aggregate {
                pod: pod as u16,
                pos: pos as u16,
            });
        }
    }
    let mut cores = Vec::new();
    for group in 0..h {
        for pos in 0..h {
            cores.push(NodeId(nodes.len() as u32));
            nodes.push(Node::Core {
                group: group as u16,
                pos: pos as u16,
            });
        }
    }

    let mut topo = Topology {
        k,
        ports: vec![Vec::new(); nodes.len()],
        nodes,
        links: Vec::new(),
        edges,
        aggregates,
        cores,
    };

    // Cables are added in port order of the lower endpoint so that port
    // numbers follow the documented layout: edge = [hosts.., aggrs..],
    // aggregate = [edges.., cores..], core = [aggr of pod 0, pod 1, ..].
    for pod in 0..k {
        for e in 0..h {
            let edge = topo.edge_switch(pod, e);
            for pos in 0..h {
                let host = topo.host_at(pod, e, pos);
                topo.connect(host, edge, params);
            }
        }
    }
    for pod in 0..k {
        for e in 0..h {
            let edge = topo.edge_switch(pod, e);
            for a in 0..h {
                let aggr = topo.aggregate_switch(pod, a);
                topo.connect(edge, aggr, params);
            }
        }
    }
    for pod in 0..k {
        for a in 0..h {
            let aggr = topo.aggregate_switch(pod, a);
            for c in 0..h {
                let core = topo.core_switch(a, c);
                topo.connect(aggr, core, params);
            }
        }
    }
    Ok(topo)
}

impl Topology {
    fn connect(&mut self, a: NodeId, b: NodeId, params: LinkParams) {
        let ab = LinkId(self.links.len() as u32);
        let ba = LinkId(ab.0 + 1);
        let a_port = self.ports[a.index()].len() as u16;
        let b_port = self.ports[b.index()].len() as u16;
        self.links.push(Link {
            from: a,
            to: b,
            from_port: a_port,
            to_port: b_port,
            capacity_bps: params.capacity_bps,
            delay: params.delay,
            reverse: ba,
        });
        self.links.push(Link {
            from: b,
            to: a,
            from_port: b_port,
            to_port: a_port,
            capacity_bps: params.capacity_bps,
            delay: params.delay,
            reverse: ab,
        });
        self.ports[a.index()].push(Port {
            peer: b,
            out_link: ab,
            in_link: ba,
        });
        self.ports[b.index()].push(Port {
            peer: a,
            out_link: ba,
            in_link: ab,
        });
    }
}
