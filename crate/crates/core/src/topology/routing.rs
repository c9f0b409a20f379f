use super::{LinkId, NodeId, Topology};

/// Distance marker for nodes that cannot reach a destination.
pub const UNREACHABLE: u32 = u32::MAX;

/// Bitmask over the ports of one node (bit `p` = port `p`).
pub type PortMask = u64;

/// Up-down (valley-free) routing state over the currently live links.
///
/// A packet climbs toward the cores only until it reaches a switch that can
/// descend to the destination edge, then it only descends. Distances are
/// computed per destination edge switch; a host is one hop beyond its edge.
/// Rebuilt from scratch whenever a link changes state.
#[derive(Debug, Clone)]
pub struct Routing {
    num_hosts: usize,
    num_edges: usize,
    up: Vec<bool>,
    // dist[node * num_edges + edge_index], u16::MAX = unreachable
    dist: Vec<u16>,
    // next[switch_index * num_edges + edge_index]
    next: Vec<PortMask>,
}

const INF: u16 = u16::MAX;

impl Routing {
    pub fn new(topo: &Topology, up: &[bool]) -> Self {
        assert_eq!(up.len(), topo.num_links());
        let n = topo.num_nodes();
        let ne = topo.edges().len();
        let nsw = topo.num_switches();
        let mut dist = vec![INF; n * ne];
        let mut next = vec![0 as PortMask; nsw * ne];
        // switches bottom-up and top-down
        let mut upward: Vec<NodeId> = topo.switches().collect();
        upward.sort_by_key(|&s| topo.node(s).layer());
        let mut downward = upward.clone();
        downward.reverse();
        let mut down = vec![INF; n];
        for (ei, &edge) in topo.edges().iter().enumerate() {
            down.fill(INF);
            down[edge.index()] = 0;
            for &v in &upward {
                let layer = topo.node(v).layer();
                for port in topo.ports(v) {
                    let below = topo.node(port.peer).layer() < layer;
                    if below && up[port.out_link.index()] && down[port.peer.index()] != INF {
                        down[v.index()] = down[v.index()].min(down[port.peer.index()] + 1);
                    }
                }
            }
            for &v in &downward {
                let layer = topo.node(v).layer();
                let mut d = down[v.index()];
                if d == INF {
                    for port in topo.ports(v) {
                        let above = topo.node(port.peer).layer() > layer;
                        let pd = dist[port.peer.index() * ne + ei];
                        if above && up[port.out_link.index()] && pd != INF {
                            d = d.min(pd + 1);
                        }
                    }
                }
                dist[v.index() * ne + ei] = d;
                if d == INF || d == 0 {
                    continue;
                }
                let descend = down[v.index()] != INF;
                let mut mask = 0;
                for (p, port) in topo.ports(v).iter().enumerate() {
                    let peer_layer = topo.node(port.peer).layer();
                    if !up[port.out_link.index()] || topo.is_host(port.peer) {
                        continue;
                    }
                    let ok = if descend {
                        peer_layer < layer && down[port.peer.index()] == d - 1
                    } else {
                        peer_layer > layer && dist[port.peer.index() * ne + ei] == d - 1
                    };
                    if ok {
                        mask |= 1 << p;
                    }
                }
                next[topo.switch_index(v) * ne + ei] = mask;
            }
            for h in topo.hosts() {
                let port = &topo.ports(h)[0];
                if up[port.out_link.index()] {
                    let pd = dist[port.peer.index() * ne + ei];
                    if pd != INF {
                        dist[h.index() * ne + ei] = pd + 1;
                    }
                }
            }
        }

        Routing {
            num_hosts: topo.num_hosts(),
            num_edges: ne,
            up: up.to_vec(),
            dist,
            next,
        }
    }

    pub fn all_up(topo: &Topology) -> Self {
        Routing::new(topo, &vec![true; topo.num_links()])
    }

    pub fn link_up(&self, link: LinkId) -> bool {
        self.up[link.index()]
    }

    fn host_attached(&self, topo: &Topology, host: NodeId) -> bool {
        let p = &topo.ports(host)[0];
        self.up[p.out_link.index()] && self.up[p.in_link.index()]
    }

    /// Hop count from `node` to `host` over live links.
    pub fn dist_to_host(&self, topo: &Topology, node: NodeId, host: NodeId) -> u32 {
        debug_assert!(host.index() < self.num_hosts);
        if node == host {
            return 0;
        }
        if !self.host_attached(topo, host) {
            return UNREACHABLE;
        }
        let ei = topo.edge_index(topo.edge_of_host(host));
        match self.dist[node.index() * self.num_edges + ei] {
            INF => UNREACHABLE,
            d => u32::from(d) + 1,
        }
    }

    pub fn reachable(&self, topo: &Topology, from: NodeId, host: NodeId) -> bool {
        self.dist_to_host(topo, from, host) != UNREACHABLE
    }

    /// Ports of `node` that lie on a shortest live path to `dst`.
    pub fn next_hops(&self, topo: &Topology, node: NodeId, dst: NodeId) -> PortMask {
        if node == dst || !self.host_attached(topo, dst) {
            return 0;
        }
        if topo.is_host(node) {
            let p = &topo.ports(node)[0];
            let ok =
                self.up[p.out_link.index()] && self.dist_to_host(topo, node, dst) != UNREACHABLE;
            return ok as PortMask;
        }
        let dst_edge = topo.edge_of_host(dst);
        if node == dst_edge {
            let port = topo.link(topo.ports(dst)[0].out_link).to_port;
            return 1 << port;
        }
        let ei = topo.edge_index(dst_edge);
        self.next[topo.switch_index(node) * self.num_edges + ei]
    }

    /// Ports of `node` through which a packet of a shortest live `src -> dst`
    /// path can arrive.
    pub fn feasible_incoming(
        &self,
        topo: &Topology,
        node: NodeId,
        src: NodeId,
        dst: NodeId,
    ) -> PortMask {
        let total = self.dist_to_host(topo, src, dst);
        let rest = self.dist_to_host(topo, node, dst);
        if total == UNREACHABLE || rest == UNREACHABLE {
            return 0;
        }
        let mut mask = 0;
        for (p, port) in topo.ports(node).iter().enumerate() {
            if !self.up[port.in_link.index()] {
                continue;
            }
            let before = self.dist_to_host(topo, port.peer, src);
            if before != UNREACHABLE && before + 1 + rest == total {
                mask |= 1 << p;
            }
        }
        mask
    }

    /// All shortest live paths between two hosts, as link sequences.
    pub fn shortest_paths(&self, topo: &Topology, src: NodeId, dst: NodeId) -> Vec<Vec<LinkId>> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.walk(topo, src, dst, &mut stack, &mut out);
        out
    }

    fn walk(
        &self,
        topo: &Topology,
        at: NodeId,
        dst: NodeId,
        stack: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
    ) {
        if at == dst {
            out.push(stack.clone());
            return;
        }
        let mask = self.next_hops(topo, at, dst);
        for p in iter_mask(mask) {
            let port = topo.port(at, p);
            stack.push(port.out_link);
            self.walk(topo, port.peer, dst, stack, out);
            stack.pop();
        }
    }
}

/// Iterate the set bits of a port mask in ascending order.
pub fn iter_mask(mut mask: PortMask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let p = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(p)
        }
    })
}
