//! Distributed flow scheduling control plane: path allocation for new
//! elephants, the periodic control loop (expiry, SIMO rebalancing,
//! imbalance detection), explicit adaptation on EAR receipt, link failure
//! handling, and the balance margin validator.

use serde::{Deserialize, Serialize};

use crate::fabric::{classify, FlowClass, MetricMode, SwitchState};
use crate::sim::{RandomStream, SimTime};
use crate::tcp::{FlowId, FlowKey};
use crate::topology::{iter_mask, Layer, NodeId, PathSpec, PortMask, Routing, Topology};

/// Wire size of one EAR, used for overhead accounting.
pub const EAR_BYTES: u64 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLoopConfig {
    pub period: SimTime,
    /// Imbalance threshold: flows in count mode, bits/s in rate mode.
    pub delta: f64,
    pub metric_mode: MetricMode,
    pub max_ears_per_tick: u32,
    /// Rebalance moves allowed per tick; `None` means k/2.
    pub max_moves_per_tick: Option<usize>,
}

impl Default for ControlLoopConfig {
    fn default() -> Self {
        ControlLoopConfig {
            period: SimTime::from_millis(10),
            delta: 1.0,
            metric_mode: MetricMode::Count,
            max_ears_per_tick: 1,
            max_moves_per_tick: None,
        }
    }
}

impl ControlLoopConfig {
    pub fn measured_rate() -> Self {
        ControlLoopConfig {
            delta: 100e6,
            metric_mode: MetricMode::MeasuredRate,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarMessage {
    pub flow: FlowId,
    pub key: FlowKey,
    pub recommendation: PathSpec,
    pub origin: NodeId,
    pub hop_trace: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveCause {
    Rebalance,
    Ear,
    Swap,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Move {
    pub switch: NodeId,
    pub flow: FlowId,
    pub from_port: usize,
    pub to_port: usize,
    pub cause: MoveCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discard {
    NoEntry,
    /// Reached the source edge without finding an adjacent switch.
    SourceReached,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdaptOutcome {
    Applied {
        moves: Vec<Move>,
    },
    /// The flow already leaves through the recommended node.
    AlreadyThere,
    /// Pass the EAR on toward the source through this port.
    Forward {
        port: usize,
    },
    Discarded(Discard),
}

/// Shared state for control-plane operations at one switch.
pub struct Difs<'a> {
    pub topo: &'a Topology,
    pub routing: &'a Routing,
    pub cfg: &'a ControlLoopConfig,
    pub tiebreak: &'a mut RandomStream,
    pub ear_pick: &'a mut RandomStream,
}

/// Pick an outgoing port for a new elephant among the feasible `mask`:
/// the single option if there is one, otherwise uniformly among the ports
/// with the smallest outgoing PSV value.
pub fn path_allocation(
    sw: &mut SwitchState,
    flow: FlowId,
    mask: PortMask,
    mode: MetricMode,
    rng: &mut RandomStream,
) -> Option<usize> {
    if let Some(p) = sw.take_pin(flow) {
        if mask & (1 << p) != 0 {
            return Some(p);
        }
    }
    match mask.count_ones() {
        0 => None,
        1 => Some(mask.trailing_zeros() as usize),
        _ => {
            let v = sw.psv_out(mode);
            let min = iter_mask(mask).map(|p| v[p]).fold(f64::INFINITY, f64::min);
            let best: Vec<usize> = iter_mask(mask).filter(|&p| v[p] == min).collect();
            Some(best[rng.index(best.len())])
        }
    }
}

fn uplink_ports(topo: &Topology, routing: &Routing, sw: &SwitchState) -> Vec<usize> {
    let layer = sw.layer();
    topo.ports(sw.node())
        .iter()
        .enumerate()
        .filter(|(_, p)| topo.node(p.peer).layer() > layer && routing.link_up(p.out_link))
        .map(|(i, _)| i)
        .collect()
}

impl Difs<'_> {
    fn dst_mask(&self, sw: &SwitchState, key: &FlowKey) -> PortMask {
        self.routing.next_hops(self.topo, sw.node(), key.dst_host)
    }

    /// Greedy SIMO rebalancing: move flows from the most to the least
    /// loaded uplink while the spread exceeds delta, newest flows first.
    pub fn rebalance_simo(&mut self, sw: &mut SwitchState) -> Vec<Move> {
        let mut moves = Vec::new();
        if !matches!(sw.layer(), Layer::Edge | Layer::Aggregate) {
            return moves;
        }
        let ups = uplink_ports(self.topo, self.routing, sw);
        if ups.len() < 2 {
            return moves;
        }
        let cap = self.cfg.max_moves_per_tick.unwrap_or(self.topo.half());
        let mode = self.cfg.metric_mode;
        while moves.len() < cap {
            let v = sw.psv_out(mode);
            let hi = *ups
                .iter()
                .reduce(|a, b| if v[*b] > v[*a] { b } else { a })
                .expect("non-empty");
            let lo = *ups
                .iter()
                .reduce(|a, b| if v[*b] < v[*a] { b } else { a })
                .expect("non-empty");
            let gap = v[hi] - v[lo];
            if gap <= self.cfg.delta {
                break;
            }
            let pick = sw
                .entries()
                .iter()
                .filter(|e| e.out_port as usize == hi)
                .filter(|e| classify(self.topo, sw.node(), &e.key) == FlowClass::Simo)
                .filter(|e| self.dst_mask(sw, &e.key) & (1 << lo) != 0)
                .filter(|e| mode == MetricMode::Count || e.measured_rate < gap)
                .max_by_key(|e| e.installed)
                .map(|e| e.flow);
            let Some(flow) = pick else { break };
            sw.move_flow(self.topo, flow, lo);
            moves.push(Move {
                switch: sw.node(),
                flow,
                from_port: hi,
                to_port: lo,
                cause: MoveCause::Rebalance,
            });
        }
        moves
    }

    /// Look for a MISO flow whose incoming link carries more than delta
    /// above the least loaded feasible incoming link. Flows are scanned in
    /// random order; the first offender yields an EAR recommending the
    /// path that would arrive over the least loaded link.
    pub fn imbalance_detect(&mut self, sw: &SwitchState) -> Option<EarMessage> {
        if !matches!(sw.layer(), Layer::Edge | Layer::Aggregate) {
            return None;
        }
        let node = sw.node();
        let mut miso: Vec<usize> = sw
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| classify(self.topo, node, &e.key) == FlowClass::Miso)
            .map(|(i, _)| i)
            .collect();
        if miso.is_empty() {
            return None;
        }
        self.ear_pick.shuffle(&mut miso);
        let v = sw.psv_in(self.cfg.metric_mode);
        for i in miso {
            let e = &sw.entries()[i];
            let feasible =
                self.routing
                    .feasible_incoming(self.topo, node, e.key.src_host, e.key.dst_host);
            if feasible.count_ones() < 2 || feasible & (1 << e.in_port) == 0 {
                continue;
            }
            let min = iter_mask(feasible)
                .map(|p| v[p])
                .fold(f64::INFINITY, f64::min);
            let gap = v[e.in_port as usize] - min;
            if gap <= self.cfg.delta {
                continue;
            }
            // by rate, moving a flow at least as fast as the gap only
            // swaps which link is overloaded
            if self.cfg.metric_mode == MetricMode::MeasuredRate && e.measured_rate >= gap {
                continue;
            }
            let lightest: Vec<usize> = iter_mask(feasible).filter(|&p| v[p] == min).collect();
            let target = lightest[self.tiebreak.index(lightest.len())];
            let link = self.topo.ports(node)[target].in_link;
            let src_pod = self.topo.pod_of(e.key.src_host).expect("hosts have pods");
            let recommendation = self
                .topo
                .mirror_uplink(node, link, src_pod)
                .expect("MISO incoming links are downhill");
            return Some(EarMessage {
                flow: e.flow,
                key: e.key,
                recommendation,
                origin: node,
                hop_trace: vec![node],
            });
        }
        None
    }

    /// Act on an EAR at a switch of the flow's path.
    pub fn explicit_adapt(&mut self, sw: &mut SwitchState, ear: &EarMessage) -> AdaptOutcome {
        let Some(e) = sw.entry(ear.flow) else {
            return AdaptOutcome::Discarded(Discard::NoEntry);
        };
        let (cur, in_port) = (e.out_port as usize, e.in_port as usize);
        let node = sw.node();
        let target = ear.recommendation.target();
        let mask = self.dst_mask(sw, &ear.key);
        match self.topo.port_towards(node, target) {
            Some(l) if mask & (1 << l) != 0 => {
                if l == cur {
                    return AdaptOutcome::AlreadyThere;
                }
                let mode = self.cfg.metric_mode;
                let v = sw.psv_out(mode);
                let mut moves = Vec::new();
                if v[l] >= v[cur] {
                    let victim = sw
                        .entries()
                        .iter()
                        .filter(|x| x.out_port as usize == l && x.flow != ear.flow)
                        .filter(|x| self.dst_mask(sw, &x.key) & (1 << cur) != 0)
                        .max_by_key(|x| x.installed)
                        .map(|x| x.flow);
                    if let Some(victim) = victim {
                        sw.move_flow(self.topo, victim, cur);
                        moves.push(Move {
                            switch: node,
                            flow: victim,
                            from_port: l,
                            to_port: cur,
                            cause: MoveCause::Swap,
                        });
                    }
                }
                sw.move_flow(self.topo, ear.flow, l);
                moves.push(Move {
                    switch: node,
                    flow: ear.flow,
                    from_port: cur,
                    to_port: l,
                    cause: MoveCause::Ear,
                });
                AdaptOutcome::Applied { moves }
            }
            _ => {
                if self.topo.is_host(self.topo.port(node, in_port).peer) {
                    AdaptOutcome::Discarded(Discard::SourceReached)
                } else {
                    AdaptOutcome::Forward { port: in_port }
                }
            }
        }
    }

    /// React to the loss of outgoing port `port`. Routing must already
    /// reflect the failure.
    pub fn on_link_failure(&mut self, sw: &mut SwitchState, port: usize) -> FailureOutcome {
        let mut out = FailureOutcome::default();
        let affected: Vec<(FlowId, FlowKey, usize)> = sw
            .entries()
            .iter()
            .filter(|e| e.out_port as usize == port)
            .map(|e| (e.flow, e.key, e.in_port as usize))
            .collect();
        for (flow, key, in_port) in affected {
            let mask = self.dst_mask(sw, &key);
            if mask != 0 {
                let to = path_allocation(sw, flow, mask, self.cfg.metric_mode, self.tiebreak)
                    .expect("non-empty mask");
                sw.move_flow(self.topo, flow, to);
                out.moves.push(Move {
                    switch: sw.node(),
                    flow,
                    from_port: port,
                    to_port: to,
                    cause: MoveCause::Failure,
                });
                continue;
            }
            sw.remove(flow);
            if !self
                .routing
                .reachable(self.topo, key.src_host, key.dst_host)
            {
                out.unreachable.push(flow);
                continue;
            }
            let upstream = self.topo.port(sw.node(), in_port).peer;
            if self.topo.is_host(upstream) {
                continue;
            }
            if let Some(rec) = self.surviving_path(&key) {
                out.ears.push((
                    in_port,
                    EarMessage {
                        flow,
                        key,
                        recommendation: rec,
                        origin: sw.node(),
                        hop_trace: vec![sw.node()],
                    },
                ));
            }
        }
        out
    }

    /// A recommendation naming some live shortest path of the flow.
    fn surviving_path(&self, key: &FlowKey) -> Option<PathSpec> {
        let paths = self
            .routing
            .shortest_paths(self.topo, key.src_host, key.dst_host);
        let path = paths.first()?;
        let nodes: Vec<NodeId> = path.iter().map(|&l| self.topo.link(l).to).collect();
        if let Some(&c) = nodes
            .iter()
            .find(|&&n| self.topo.node(n).layer() == Layer::Core)
        {
            return Some(PathSpec::via_core(c));
        }
        nodes
            .iter()
            .find(|&&n| self.topo.node(n).layer() == Layer::Aggregate)
            .map(|&a| PathSpec::via_aggregate(a))
    }
}

#[derive(Debug, Clone, Default)]
pub struct FailureOutcome {
    pub moves: Vec<Move>,
    /// EARs to send, each with the port it leaves through.
    pub ears: Vec<(usize, EarMessage)>,
    pub unreachable: Vec<FlowId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginScope {
    /// Flows sent up to each aggregate by its pod's edges.
    Aggregate,
    /// Flows sent to each core by the aggregates.
    Core,
    /// Flows delivered down to each edge (traffic dependent; reported only).
    Edge,
    /// Flows each aggregate delivers down to its pod's edges, counted at
    /// the receiving edges.
    EdgeDownlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScopeMargin {
    pub scope: MarginScope,
    pub pod: Option<usize>,
    pub max: u32,
    pub min: u32,
    pub bound: f64,
    /// Whether exceeding the bound counts as a violation.
    pub enforced: bool,
}

impl ScopeMargin {
    pub fn spread(&self) -> u32 {
        self.max - self.min
    }

    pub fn violated(&self) -> bool {
        self.enforced && f64::from(self.spread()) > self.bound
    }
}

/// Balance margins from a brute-force count over all flow tables, using
/// only entries refreshed within `live` of `now`.
///
/// The aggregate and core scopes carry the bounds delta*k/2 and 3k. The
/// per-edge demand spread depends only on where traffic is destined, so it
/// is reported against k/2 without being enforced; the enforced receive
/// side counterpart is the edge-downlink scope with bound delta*k/2.
pub fn bo_bi_margins(
    topo: &Topology,
    switches: &[SwitchState],
    delta: f64,
    now: SimTime,
    live: SimTime,
) -> Vec<ScopeMargin> {
    let k = topo.k();
    let half = topo.half();
    let is_live = |t: SimTime| now.saturating_sub(t) <= live;
    let sw = |id: NodeId| &switches[topo.switch_index(id)];
    // flows from `from` toward neighbour `to`
    let toward = |from: NodeId, to: NodeId| -> u32 {
        let p = topo.port_towards(from, to).expect("adjacent");
        sw(from)
            .entries()
            .iter()
            .filter(|e| e.out_port as usize == p && is_live(e.t))
            .count() as u32
    };
    let from_port = |at: NodeId, from: NodeId| -> u32 {
        let p = topo.port_towards(at, from).expect("adjacent");
        sw(at)
            .entries()
            .iter()
            .filter(|e| e.in_port as usize == p && is_live(e.t))
            .count() as u32
    };
    let spread = |scope, pod, vals: Vec<u32>, bound, enforced| ScopeMargin {
        scope,
        pod,
        max: vals.iter().copied().max().unwrap_or(0),
        min: vals.iter().copied().min().unwrap_or(0),
        bound,
        enforced,
    };

    let mut out = Vec::new();
    for pod in 0..k {
        let edges: Vec<NodeId> = (0..half).map(|e| topo.edge_switch(pod, e)).collect();
        let aggrs: Vec<NodeId> = (0..half).map(|a| topo.aggregate_switch(pod, a)).collect();
        let up: Vec<u32> = aggrs
            .iter()
            .map(|&a| edges.iter().map(|&e| toward(e, a)).sum())
            .collect();
        out.push(spread(
            MarginScope::Aggregate,
            Some(pod),
            up,
            delta * half as f64,
            true,
        ));
        let down: Vec<u32> = edges
            .iter()
            .map(|&e| aggrs.iter().map(|&a| toward(a, e)).sum())
            .collect();
        out.push(spread(
            MarginScope::Edge,
            Some(pod),
            down,
            half as f64,
            false,
        ));
        let received: Vec<u32> = aggrs
            .iter()
            .map(|&a| edges.iter().map(|&e| from_port(e, a)).sum())
            .collect();
        out.push(spread(
            MarginScope::EdgeDownlink,
            Some(pod),
            received,
            delta * half as f64,
            true,
        ));
    }
    let cores: Vec<u32> = topo
        .cores()
        .iter()
        .map(|&c| topo.ports(c).iter().map(|p| toward(p.peer, c)).sum())
        .collect();
    out.push(spread(MarginScope::Core, None, cores, 3.0 * k as f64, true));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::StreamId;
    use crate::topology::build_fat_tree;

    struct Bench {
        t: Topology,
        r: Routing,
        cfg: ControlLoopConfig,
        tie: RandomStream,
        pick: RandomStream,
    }

    impl Bench {
        fn new() -> Self {
            let t = build_fat_tree(4).unwrap();
            let r = Routing::all_up(&t);
            Bench {
                t,
                r,
                cfg: ControlLoopConfig::default(),
                tie: RandomStream::new(3, StreamId::DifsTiebreak),
                pick: RandomStream::new(3, StreamId::EarTargetPick),
            }
        }

        fn difs(&mut self) -> Difs<'_> {
            Difs {
                topo: &self.t,
                routing: &self.r,
                cfg: &self.cfg,
                tiebreak: &mut self.tie,
                ear_pick: &mut self.pick,
            }
        }

        fn switch(&self, node: NodeId) -> SwitchState {
            SwitchState::new(&self.t, node, 9)
        }
    }

    fn inter_pod(t: &Topology, serial: u32) -> FlowKey {
        FlowKey::new(t.host_at(0, 0, 0), t.host_at(2, 1, 1), serial)
    }

    #[test]
    fn allocation_picks_among_least_loaded() {
        let b = Bench::new();
        // core switch ports 0..3 stand in for links a,b,c (+1 unused)
        let mut sw = b.switch(b.t.aggregate_switch(0, 0));
        let k = inter_pod(&b.t, 0);
        // V_o = [.., a=2, b=1, c=1] on ports 0,1,2
        for (i, port) in [0, 0, 1, 2].into_iter().enumerate() {
            sw.install(&b.t, k, FlowId(i as u32), 3, port, SimTime::ZERO);
        }
        let mut rng = RandomStream::new(5, StreamId::DifsTiebreak);
        let mut hits = [0u32; 3];
        for _ in 0..4000 {
            let p =
                path_allocation(&mut sw, FlowId(99), 0b111, MetricMode::Count, &mut rng).unwrap();
            hits[p] += 1;
        }
        assert_eq!(hits[0], 0);
        // each of b, c with probability 1/2: 2000 +- 4 sigma (sigma ~ 31.6)
        for h in &hits[1..] {
            assert!((*h as i64 - 2000).abs() < 130, "{hits:?}");
        }
    }

    #[test]
    fn single_feasible_link_ignores_psv() {
        let b = Bench::new();
        let mut sw = b.switch(b.t.edge_switch(0, 0));
        let k = inter_pod(&b.t, 0);
        for i in 0..5 {
            sw.install(&b.t, k, FlowId(i), 0, 3, SimTime::ZERO);
        }
        let mut rng = RandomStream::new(5, StreamId::DifsTiebreak);
        assert_eq!(
            path_allocation(&mut sw, FlowId(9), 1 << 3, MetricMode::Count, &mut rng),
            Some(3)
        );
        assert_eq!(
            path_allocation(&mut sw, FlowId(9), 0, MetricMode::Count, &mut rng),
            None
        );
    }

    #[test]
    fn pin_overrides_allocation_once() {
        let b = Bench::new();
        let mut sw = b.switch(b.t.edge_switch(0, 0));
        sw.pin(FlowId(1), 3);
        sw.install(&b.t, inter_pod(&b.t, 0), FlowId(0), 0, 3, SimTime::ZERO);
        let mut rng = RandomStream::new(5, StreamId::DifsTiebreak);
        assert_eq!(
            path_allocation(&mut sw, FlowId(1), 0b1100, MetricMode::Count, &mut rng),
            Some(3)
        );
        assert_eq!(
            path_allocation(&mut sw, FlowId(1), 0b1100, MetricMode::Count, &mut rng),
            Some(2)
        );
    }

    fn load_uplinks(b: &Bench, sw: &mut SwitchState, counts: &[u32]) -> u32 {
        let mut f = 0;
        for (i, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let k = inter_pod(&b.t, f);
                sw.install(&b.t, k, FlowId(f), 0, 2 + i, SimTime::ZERO);
                f += 1;
            }
        }
        f
    }

    #[test]
    fn rebalance_examples() {
        let mut b = Bench::new();
        let edge = b.t.edge_switch(0, 0);

        let mut sw = b.switch(edge);
        load_uplinks(&b, &mut sw, &[3, 1]);
        let moves = b.difs().rebalance_simo(&mut sw);
        assert_eq!(moves.len(), 1);
        assert_eq!(&sw.v_out()[2..], &[2, 2]);

        let mut sw = b.switch(edge);
        load_uplinks(&b, &mut sw, &[2, 2]);
        assert!(b.difs().rebalance_simo(&mut sw).is_empty());

        let mut sw = b.switch(edge);
        load_uplinks(&b, &mut sw, &[5, 0]);
        b.cfg.max_moves_per_tick = Some(2);
        let moves = b.difs().rebalance_simo(&mut sw);
        assert_eq!(moves.len(), 2);
        assert_eq!(&sw.v_out()[2..], &[3, 2]);
        // newest first
        assert_eq!(moves[0].flow, FlowId(4));
        assert_eq!(moves[1].flow, FlowId(3));
        sw.check_psv().unwrap();
    }

    /// Downhill aggregate in pod 1 with flows from pod 2 entering on
    /// core ports given by `ins`.
    fn downhill_aggregate(b: &Bench, ins: &[usize]) -> SwitchState {
        let mut sw = b.switch(b.t.aggregate_switch(1, 0));
        for (i, &p) in ins.iter().enumerate() {
            let k = FlowKey::new(b.t.host_at(2, 0, i % 2), b.t.host_at(1, i % 2, 0), i as u32);
            sw.install(&b.t, k, FlowId(i as u32), p, i % 2, SimTime::ZERO);
        }
        sw
    }

    #[test]
    fn imbalance_two_vs_zero_recommends_mirror_of_idle_link() {
        let mut b = Bench::new();
        // both flows arrive from core port 3, port 2 idle
        let sw = downhill_aggregate(&b, &[3, 3]);
        let ear = b.difs().imbalance_detect(&sw).expect("2 - 0 > 1");
        let idle_core = b.t.port(sw.node(), 2).peer;
        assert_eq!(ear.recommendation, PathSpec::via_core(idle_core));
        assert_eq!(ear.origin, sw.node());
        // balanced: no EAR
        let sw = downhill_aggregate(&b, &[2, 3]);
        assert!(b.difs().imbalance_detect(&sw).is_none());
    }

    #[test]
    fn rate_mode_does_not_bounce_a_lone_fast_flow() {
        let mut b = Bench::new();
        b.cfg = ControlLoopConfig::measured_rate();
        fn rate(t: &Topology, sw: &mut SwitchState, flows: &[(u32, usize)], bytes: u64) {
            // constant bytes per flow every 10 us for 100 ms
            for i in 0..10_000u64 {
                for &(f, port) in flows {
                    let s = sw.slot_of(FlowId(f)).unwrap();
                    sw.touch(t, s, port, bytes, SimTime::from_micros(i * 10));
                }
            }
            sw.update_rates(SimTime::from_millis(100));
        }
        // one flow at 1 Gbps on port 3: moving it would just swap links
        let mut sw = downhill_aggregate(&b, &[3]);
        rate(&b.t, &mut sw, &[(0, 3)], 1250);
        assert!(b.difs().imbalance_detect(&sw).is_none());
        // two flows at 500 Mbps each on port 3: moving one halves the gap
        let mut sw = downhill_aggregate(&b, &[3, 3]);
        rate(&b.t, &mut sw, &[(0, 3), (1, 3)], 625);
        assert!(b.difs().imbalance_detect(&sw).is_some());
    }

    #[test]
    fn colliding_senders_are_picked_at_random() {
        let mut b = Bench::new();
        let sw = downhill_aggregate(&b, &[3, 3]);
        let mut seen = [0u32; 2];
        for _ in 0..200 {
            let ear = b.difs().imbalance_detect(&sw).unwrap();
            seen[ear.flow.index()] += 1;
        }
        assert!(seen[0] > 60 && seen[1] > 60, "{seen:?}");
    }

    #[test]
    fn ear_applied_at_adjacent_aggregate_without_swap() {
        let mut b = Bench::new();
        let aggr = b.t.aggregate_switch(2, 0);
        let mut sw = b.switch(aggr);
        let c0 = b.t.core_switch(0, 0);
        let c1 = b.t.core_switch(0, 1);
        let p0 = b.t.port_towards(aggr, c0).unwrap();
        let p1 = b.t.port_towards(aggr, c1).unwrap();
        let key = FlowKey::new(b.t.host_at(2, 0, 0), b.t.host_at(1, 0, 0), 0);
        sw.install(&b.t, key, FlowId(0), 0, p1, SimTime::ZERO);
        let other = FlowKey::new(b.t.host_at(2, 1, 0), b.t.host_at(3, 0, 0), 0);
        sw.install(&b.t, other, FlowId(1), 1, p1, SimTime::ZERO);
        let ear = EarMessage {
            flow: FlowId(0),
            key,
            recommendation: PathSpec::via_core(c0),
            origin: b.t.aggregate_switch(1, 0),
            hop_trace: vec![],
        };
        let total: u32 = sw.v_out().iter().sum();
        match b.difs().explicit_adapt(&mut sw, &ear) {
            AdaptOutcome::Applied { moves } => {
                assert_eq!(moves.len(), 1);
                assert_eq!(moves[0].cause, MoveCause::Ear);
            }
            o => panic!("{o:?}"),
        }
        assert_eq!(sw.entry(FlowId(0)).unwrap().out_port as usize, p0);
        assert_eq!((sw.v_out()[p0], sw.v_out()[p1]), (1, 1));
        assert_eq!(sw.v_out().iter().sum::<u32>(), total);
    }

    #[test]
    fn ear_swaps_when_target_is_not_lighter() {
        let mut b = Bench::new();
        let edge = b.t.edge_switch(2, 0);
        let mut sw = b.switch(edge);
        // uplink ports 2 and 3, two flows on each; flow 0 on port 3
        let mk = |s: u32| FlowKey::new(b.t.host_at(2, 0, 0), b.t.host_at(1, 0, 1), s);
        sw.install(&b.t, mk(0), FlowId(0), 0, 3, SimTime::ZERO);
        sw.install(&b.t, mk(1), FlowId(1), 0, 3, SimTime::ZERO);
        sw.install(&b.t, mk(2), FlowId(2), 0, 2, SimTime::ZERO);
        sw.install(&b.t, mk(3), FlowId(3), 0, 2, SimTime::ZERO);
        let target = b.t.port(edge, 2).peer;
        let ear = EarMessage {
            flow: FlowId(0),
            key: mk(0),
            recommendation: PathSpec::via_aggregate(target),
            origin: b.t.edge_switch(1, 0),
            hop_trace: vec![],
        };
        match b.difs().explicit_adapt(&mut sw, &ear) {
            AdaptOutcome::Applied { moves } => {
                assert_eq!(moves.len(), 2);
                assert_eq!(moves[0].cause, MoveCause::Swap);
                // most recently installed flow on the target link
                assert_eq!(moves[0].flow, FlowId(3));
            }
            o => panic!("{o:?}"),
        }
        assert_eq!(&sw.v_out()[2..], &[2, 2]);
        assert_eq!(sw.entry(FlowId(0)).unwrap().out_port, 2);
        sw.check_psv().unwrap();
    }

    #[test]
    fn ear_forwarded_when_not_adjacent_and_discarded_at_source() {
        let mut b = Bench::new();
        let aggr = b.t.aggregate_switch(2, 1);
        let mut sw = b.switch(aggr);
        let key = FlowKey::new(b.t.host_at(2, 0, 0), b.t.host_at(1, 0, 0), 0);
        // arrives from edge port 0, leaves toward a core
        sw.install(&b.t, key, FlowId(0), 0, 2, SimTime::ZERO);
        let ear = EarMessage {
            flow: FlowId(0),
            key,
            recommendation: PathSpec::via_aggregate(b.t.aggregate_switch(2, 0)),
            origin: b.t.edge_switch(1, 0),
            hop_trace: vec![],
        };
        assert_eq!(
            b.difs().explicit_adapt(&mut sw, &ear),
            AdaptOutcome::Forward { port: 0 }
        );
        // unknown flow
        let mut other = ear.clone();
        other.flow = FlowId(7);
        assert_eq!(
            b.difs().explicit_adapt(&mut sw, &other),
            AdaptOutcome::Discarded(Discard::NoEntry)
        );
        // source edge not adjacent to a recommended core
        let edge = b.t.edge_switch(2, 0);
        let mut esw = b.switch(edge);
        esw.install(&b.t, key, FlowId(0), 0, 2, SimTime::ZERO);
        let mut to_core = ear.clone();
        to_core.recommendation = PathSpec::via_core(b.t.core_switch(1, 1));
        assert_eq!(
            b.difs().explicit_adapt(&mut esw, &to_core),
            AdaptOutcome::Discarded(Discard::SourceReached)
        );
    }

    #[test]
    fn failed_uplink_rehomes_flows_locally() {
        let mut b = Bench::new();
        let aggr = b.t.aggregate_switch(0, 0);
        let mut sw = b.switch(aggr);
        let key = inter_pod(&b.t, 0);
        sw.install(&b.t, key, FlowId(0), 0, 2, SimTime::ZERO);
        let l = b.t.ports(aggr)[2].out_link;
        let mut up = vec![true; b.t.num_links()];
        up[l.index()] = false;
        up[b.t.link(l).reverse.index()] = false;
        b.r = Routing::new(&b.t, &up);
        let out = b.difs().on_link_failure(&mut sw, 2);
        assert_eq!(out.moves.len(), 1);
        assert_eq!(out.moves[0].to_port, 3);
        assert!(out.ears.is_empty() && out.unreachable.is_empty());
        // nothing on the link: nothing to do
        let out = b.difs().on_link_failure(&mut sw, 2);
        assert!(out.moves.is_empty());
    }

    #[test]
    fn dead_destination_edge_reports_unreachable() {
        let mut b = Bench::new();
        let dst_edge = b.t.edge_switch(2, 1);
        let aggr = b.t.aggregate_switch(2, 0);
        let mut sw = b.switch(aggr);
        let key = inter_pod(&b.t, 0);
        let p = b.t.port_towards(aggr, dst_edge).unwrap();
        sw.install(&b.t, key, FlowId(0), 2, p, SimTime::ZERO);
        let mut up = vec![true; b.t.num_links()];
        for port in b.t.ports(dst_edge) {
            up[port.out_link.index()] = false;
            up[port.in_link.index()] = false;
        }
        b.r = Routing::new(&b.t, &up);
        let out = b.difs().on_link_failure(&mut sw, p);
        assert_eq!(out.unreachable, vec![FlowId(0)]);
        assert!(sw.entries().is_empty());
    }

    #[test]
    fn margin_bounds_and_idle_network() {
        let b = Bench::new();
        let switches: Vec<SwitchState> = b.t.switches().map(|s| b.switch(s)).collect();
        let m = bo_bi_margins(&b.t, &switches, 1.0, SimTime::ZERO, SimTime::from_millis(1));
        let bound = |s: MarginScope| m.iter().find(|x| x.scope == s).unwrap().bound;
        assert_eq!(bound(MarginScope::Aggregate), 2.0);
        assert_eq!(bound(MarginScope::Core), 12.0);
        assert_eq!(bound(MarginScope::Edge), 2.0);
        assert!(m.iter().all(|x| x.spread() == 0 && !x.violated()));
    }

    #[test]
    fn margins_count_live_entries_only() {
        let b = Bench::new();
        let mut switches: Vec<SwitchState> = b.t.switches().map(|s| b.switch(s)).collect();
        let edge = b.t.edge_switch(0, 0);
        let idx = b.t.switch_index(edge);
        for f in 0..3 {
            switches[idx].install(&b.t, inter_pod(&b.t, f), FlowId(f), 0, 2, SimTime::ZERO);
        }
        let m = bo_bi_margins(&b.t, &switches, 1.0, SimTime::ZERO, SimTime::from_millis(1));
        let aggr0 = m
            .iter()
            .find(|x| x.scope == MarginScope::Aggregate && x.pod == Some(0))
            .unwrap();
        assert_eq!((aggr0.max, aggr0.min), (3, 0));
        assert!(aggr0.violated());
        let later = bo_bi_margins(
            &b.t,
            &switches,
            1.0,
            SimTime::from_millis(5),
            SimTime::from_millis(1),
        );
        assert!(later.iter().all(|x| x.spread() == 0));
    }
}
