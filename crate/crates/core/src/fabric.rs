//! Per-switch data plane: flow table, port state vectors, elephant
//! detection at the source edge, and the forwarding decision.

use serde::{Deserialize, Serialize};

use crate::difs;
use crate::network::{Packet, PacketFlags};
use crate::sim::{mix64, RandomStream, SimTime};
use crate::tcp::{FlowId, FlowKey};
use crate::topology::{iter_mask, Layer, LinkId, NodeId, PortMask, Routing, Topology};

/// Default elephant threshold: 100 KB of payload seen at the source edge.
pub const DEFAULT_ELEPHANT_THRESHOLD: u64 = 100 * 1000;
/// Averaging window for measured flow rates.
pub const RATE_WINDOW: SimTime = SimTime::from_millis(100);
const RATE_EWMA_GAIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    Difs,
    Ecmp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Port state vectors count elephant flows.
    Count,
    /// Port state vectors sum measured flow rates (bits/s).
    MeasuredRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FlowClass {
    Siso,
    Simo,
    Miso,
}

/// Structural class of a flow at a switch on one of its shortest paths:
/// uphill edge/aggregate switches see single-in-multiple-out flows,
/// downhill ones multiple-in-single-out, cores and turning points SISO.
pub fn classify(topo: &Topology, switch: NodeId, key: &FlowKey) -> FlowClass {
    let node = topo.node(switch);
    let below = |host: NodeId| match node.layer() {
        Layer::Edge => topo.edge_of_host(host) == switch,
        Layer::Aggregate => topo.pod_of(host) == node.pod(),
        _ => false,
    };
    match (below(key.src_host), below(key.dst_host)) {
        (true, false) => FlowClass::Simo,
        (false, true) => FlowClass::Miso,
        _ => FlowClass::Siso,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTableEntry {
    pub flow: FlowId,
    pub key: FlowKey,
    pub l_in: LinkId,
    pub l_out: LinkId,
    pub in_port: u16,
    pub out_port: u16,
    /// Last time a packet of the flow was seen.
    pub t: SimTime,
    pub bytes_seen: u64,
    /// Exponentially averaged rate in bits/s.
    pub measured_rate: f64,
    /// Install order; later entries have larger values. Refreshed when the
    /// flow is moved to another link.
    pub installed: u64,
    #[serde(skip)]
    window_bytes: u64,
    #[serde(skip)]
    window_start: SimTime,
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct SwitchCounters {
    pub implicit_pars: u64,
    pub expired: u64,
    pub moves: u64,
    pub unroutable_drops: u64,
    pub ears_sent: u64,
    pub ears_applied: u64,
    pub ears_forwarded: u64,
    pub ears_discarded: u64,
}

const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct SwitchState {
    node: NodeId,
    layer: Layer,
    salt: u64,
    // FlowId -> index into `entries`
    slot: Vec<u32>,
    entries: Vec<FlowTableEntry>,
    v_in: Vec<u32>,
    v_out: Vec<u32>,
    // payload bytes per flow sourced below this switch (edges only)
    elephant_bytes: Vec<u64>,
    // allocation overrides consumed at the flow's first allocation
    pins: Vec<(FlowId, u16)>,
    install_seq: u64,
    pub counters: SwitchCounters,
}

impl SwitchState {
    pub fn new(topo: &Topology, node: NodeId, run_salt: u64) -> Self {
        let ports = topo.ports(node).len();
        SwitchState {
            node,
            layer: topo.node(node).layer(),
            salt: mix64(run_salt ^ u64::from(node.0)),
            slot: Vec::new(),
            entries: Vec::new(),
            v_in: vec![0; ports],
            v_out: vec![0; ports],
            elephant_bytes: Vec::new(),
            pins: Vec::new(),
            install_seq: 0,
            counters: SwitchCounters::default(),
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn num_ports(&self) -> usize {
        self.v_out.len()
    }

    pub fn entries(&self) -> &[FlowTableEntry] {
        &self.entries
    }

    pub fn entry(&self, flow: FlowId) -> Option<&FlowTableEntry> {
        match self.slot.get(flow.index()) {
            Some(&s) if s != NO_SLOT => Some(&self.entries[s as usize]),
            _ => None,
        }
    }

    pub(crate) fn slot_of(&self, flow: FlowId) -> Option<usize> {
        match self.slot.get(flow.index()) {
            Some(&s) if s != NO_SLOT => Some(s as usize),
            _ => None,
        }
    }

    /// Count-mode port state vector over incoming ports.
    pub fn v_in(&self) -> &[u32] {
        &self.v_in
    }

    /// Count-mode port state vector over outgoing ports.
    pub fn v_out(&self) -> &[u32] {
        &self.v_out
    }

    /// Outgoing PSV in the given metric.
    pub fn psv_out(&self, mode: MetricMode) -> Vec<f64> {
        match mode {
            MetricMode::Count => self.v_out.iter().map(|&v| f64::from(v)).collect(),
            MetricMode::MeasuredRate => {
                let mut v = vec![0.0; self.v_out.len()];
                for e in &self.entries {
                    v[e.out_port as usize] += e.measured_rate;
                }
                v
            }
        }
    }

    /// Incoming PSV in the given metric.
    pub fn psv_in(&self, mode: MetricMode) -> Vec<f64> {
        match mode {
            MetricMode::Count => self.v_in.iter().map(|&v| f64::from(v)).collect(),
            MetricMode::MeasuredRate => {
                let mut v = vec![0.0; self.v_in.len()];
                for e in &self.entries {
                    v[e.in_port as usize] += e.measured_rate;
                }
                v
            }
        }
    }

    /// Weight of one flow in the given metric.
    pub fn weight(&self, flow: FlowId, mode: MetricMode) -> f64 {
        match mode {
            MetricMode::Count => 1.0,
            MetricMode::MeasuredRate => self.entry(flow).map_or(0.0, |e| e.measured_rate),
        }
    }

    pub fn install(
        &mut self,
        topo: &Topology,
        key: FlowKey,
        flow: FlowId,
        in_port: usize,
        out_port: usize,
        now: SimTime,
    ) {
        assert!(self.entry(flow).is_none(), "flow installed twice");
        if self.slot.len() <= flow.index() {
            self.slot.resize(flow.index() + 1, NO_SLOT);
        }
        self.install_seq += 1;
        let ports = topo.ports(self.node);
        self.slot[flow.index()] = self.entries.len() as u32;
        self.entries.push(FlowTableEntry {
            flow,
            key,
            l_in: ports[in_port].in_link,
            l_out: ports[out_port].out_link,
            in_port: in_port as u16,
            out_port: out_port as u16,
            t: now,
            bytes_seen: 0,
            measured_rate: 0.0,
            installed: self.install_seq,
            window_bytes: 0,
            window_start: now,
        });
        self.v_in[in_port] += 1;
        self.v_out[out_port] += 1;
    }

    pub fn remove(&mut self, flow: FlowId) -> Option<FlowTableEntry> {
        let s = self.slot_of(flow)?;
        self.slot[flow.index()] = NO_SLOT;
        let e = self.entries.swap_remove(s);
        if let Some(moved) = self.entries.get(s) {
            self.slot[moved.flow.index()] = s as u32;
        }
        self.v_in[e.in_port as usize] -= 1;
        self.v_out[e.out_port as usize] -= 1;
        Some(e)
    }

    /// Re-point a flow's outgoing link.
    pub fn move_flow(&mut self, topo: &Topology, flow: FlowId, out_port: usize) {
        let s = self.slot_of(flow).expect("moving unknown flow");
        self.install_seq += 1;
        let out_link = topo.ports(self.node)[out_port].out_link;
        let e = &mut self.entries[s];
        self.v_out[e.out_port as usize] -= 1;
        self.v_out[out_port] += 1;
        e.out_port = out_port as u16;
        e.l_out = out_link;
        e.installed = self.install_seq;
        self.counters.moves += 1;
    }

    /// Record a packet of an installed flow arriving on `in_port`.
    pub(crate) fn touch(
        &mut self,
        topo: &Topology,
        s: usize,
        in_port: usize,
        bytes: u64,
        now: SimTime,
    ) {
        let e = &mut self.entries[s];
        e.t = now;
        e.bytes_seen += bytes;
        e.window_bytes += bytes;
        if e.in_port as usize != in_port {
            self.v_in[e.in_port as usize] -= 1;
            self.v_in[in_port] += 1;
            e.in_port = in_port as u16;
            e.l_in = topo.ports(self.node)[in_port].in_link;
        }
    }

    /// Remove entries idle for longer than `threshold`.
    pub fn expire_flows(&mut self, now: SimTime, threshold: SimTime) -> Vec<FlowTableEntry> {
        let idle: Vec<FlowId> = self
            .entries
            .iter()
            .filter(|e| now.saturating_sub(e.t) > threshold)
            .map(|e| e.flow)
            .collect();
        let mut out = Vec::with_capacity(idle.len());
        for f in idle {
            out.push(self.remove(f).expect("listed entry exists"));
        }
        self.counters.expired += out.len() as u64;
        out
    }

    /// Fold each entry's byte window into its averaged rate once the
    /// window has run its length.
    pub fn update_rates(&mut self, now: SimTime) {
        for e in &mut self.entries {
            let span = now.saturating_sub(e.window_start);
            if span >= RATE_WINDOW {
                let sample = e.window_bytes as f64 * 8.0 / span.as_secs_f64();
                e.measured_rate = if e.measured_rate == 0.0 {
                    sample
                } else {
                    RATE_EWMA_GAIN * sample + (1.0 - RATE_EWMA_GAIN) * e.measured_rate
                };
                e.window_bytes = 0;
                e.window_start = now;
            }
        }
    }

    /// Brute-force recount of the count-mode PSVs against the flow table.
    pub fn check_psv(&self) -> Result<(), String> {
        let mut vi = vec![0u32; self.v_in.len()];
        let mut vo = vec![0u32; self.v_out.len()];
        for (i, e) in self.entries.iter().enumerate() {
            vi[e.in_port as usize] += 1;
            vo[e.out_port as usize] += 1;
            if self.slot_of(e.flow) != Some(i) {
                return Err(format!("slot index of {:?} is stale", e.flow));
            }
        }
        if vi != self.v_in || vo != self.v_out {
            return Err(format!(
                "PSV mismatch: V_i {:?} vs {:?}, V_o {:?} vs {:?}",
                self.v_in, vi, self.v_out, vo
            ));
        }
        Ok(())
    }

    /// Count payload toward the elephant threshold. Returns true once the
    /// flow had already exceeded the threshold before this packet.
    pub fn detect_elephant(&mut self, flow: FlowId, payload: u64, threshold: u64) -> bool {
        if self.elephant_bytes.len() <= flow.index() {
            self.elephant_bytes.resize(flow.index() + 1, 0);
        }
        let seen = &mut self.elephant_bytes[flow.index()];
        let mark = *seen > threshold;
        *seen += payload;
        mark
    }

    /// Force the next allocation of `flow` at this switch onto `port`.
    pub fn pin(&mut self, flow: FlowId, port: usize) {
        self.pins.retain(|p| p.0 != flow);
        self.pins.push((flow, port as u16));
    }

    pub(crate) fn take_pin(&mut self, flow: FlowId) -> Option<usize> {
        let i = self.pins.iter().position(|p| p.0 == flow)?;
        Some(self.pins.swap_remove(i).1 as usize)
    }

    /// ECMP choice among `mask` for a flow hash.
    pub fn ecmp_port(&self, flow_hash: u64, mask: PortMask) -> Option<usize> {
        let n = mask.count_ones() as u64;
        if n == 0 {
            return None;
        }
        let pick = mix64(flow_hash ^ self.salt) % n;
        iter_mask(mask).nth(pick as usize)
    }
}

/// Read-only context plus the tie-break stream for forwarding decisions.
pub struct Fabric<'a> {
    pub topo: &'a Topology,
    pub routing: &'a Routing,
    pub scheduler: Scheduler,
    pub mode: MetricMode,
    pub elephant_threshold: u64,
    pub rng: &'a mut RandomStream,
}

impl Fabric<'_> {
    /// Choose the output port for `pkt` arriving at `sw` on `in_port`.
    /// `None` means no live next hop exists and the packet is dropped.
    pub fn forward(
        &mut self,
        sw: &mut SwitchState,
        pkt: &mut Packet,
        in_port: usize,
        key: &FlowKey,
        flow_hash: u64,
        now: SimTime,
    ) -> Option<usize> {
        let reverse = pkt.is_reverse();
        let dst = if reverse { key.src_host } else { key.dst_host };
        let mask = self.routing.next_hops(self.topo, sw.node, dst);
        if mask == 0 {
            sw.counters.unroutable_drops += 1;
            return None;
        }
        if self.scheduler == Scheduler::Ecmp
            || reverse
            || pkt.flags.contains(PacketFlags::SYN)
            || pkt.payload_len == 0
        {
            return sw.ecmp_port(flow_hash, mask);
        }
        if sw.layer == Layer::Edge
            && self.topo.edge_of_host(key.src_host) == sw.node
            && sw.detect_elephant(
                pkt.flow,
                u64::from(pkt.payload_len),
                self.elephant_threshold,
            )
        {
            pkt.flags.insert(PacketFlags::ELEPHANT_MARK);
        }
        if !pkt.flags.contains(PacketFlags::ELEPHANT_MARK) {
            return sw.ecmp_port(flow_hash, mask);
        }
        let bytes = pkt.size_bytes();
        if let Some(s) = sw.slot_of(pkt.flow) {
            let out = sw.entries[s].out_port as usize;
            if mask & (1 << out) != 0 {
                sw.touch(self.topo, s, in_port, bytes, now);
                return Some(out);
            }
            // pinned link no longer usable: allocate afresh
            sw.remove(pkt.flow);
        }
        pkt.flags.insert(PacketFlags::PAR_IMPLICIT);
        sw.counters.implicit_pars += 1;
        let out = difs::path_allocation(sw, pkt.flow, mask, self.mode, self.rng)?;
        sw.install(self.topo, *key, pkt.flow, in_port, out, now);
        let s = sw.slot_of(pkt.flow).expect("just installed");
        sw.touch(self.topo, s, in_port, bytes, now);
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MSS;
    use crate::sim::StreamId;
    use crate::topology::build_fat_tree;

    fn key(t: &Topology, src: usize, dst: usize, serial: u32) -> FlowKey {
        FlowKey::new(t.host(src), t.host(dst), serial)
    }

    #[test]
    fn classification_follows_tree_position() {
        let t = build_fat_tree(4).unwrap();
        let k = FlowKey::new(t.host_at(0, 0, 0), t.host_at(1, 0, 0), 0);
        assert_eq!(classify(&t, t.edge_switch(0, 0), &k), FlowClass::Simo);
        assert_eq!(classify(&t, t.aggregate_switch(0, 1), &k), FlowClass::Simo);
        assert_eq!(classify(&t, t.core_switch(1, 0), &k), FlowClass::Siso);
        assert_eq!(classify(&t, t.aggregate_switch(1, 0), &k), FlowClass::Miso);
        assert_eq!(classify(&t, t.edge_switch(1, 0), &k), FlowClass::Miso);
        // intra-pod flow turns around at the aggregate
        let intra = FlowKey::new(t.host_at(0, 0, 0), t.host_at(0, 1, 0), 0);
        assert_eq!(
            classify(&t, t.aggregate_switch(0, 0), &intra),
            FlowClass::Siso
        );
        assert_eq!(classify(&t, t.edge_switch(0, 1), &intra), FlowClass::Miso);
    }

    #[test]
    fn elephant_mark_starts_after_threshold_is_crossed() {
        let t = build_fat_tree(4).unwrap();
        let mut sw = SwitchState::new(&t, t.edge_switch(0, 0), 0);
        let f = FlowId(3);
        // 99 KB cumulative: no mark
        assert!(!sw.detect_elephant(f, 99_000, DEFAULT_ELEPHANT_THRESHOLD));
        // this packet crosses 100 KB but is itself unmarked
        assert!(!sw.detect_elephant(f, 1460, DEFAULT_ELEPHANT_THRESHOLD));
        assert!(sw.detect_elephant(f, 1460, DEFAULT_ELEPHANT_THRESHOLD));
        // a 50 KB mouse never qualifies
        let mouse = FlowId(4);
        for _ in 0..34 {
            assert!(!sw.detect_elephant(mouse, 1460, DEFAULT_ELEPHANT_THRESHOLD));
        }
    }

    struct Bench {
        t: Topology,
        r: Routing,
        rng: RandomStream,
    }

    impl Bench {
        fn new() -> Self {
            let t = build_fat_tree(4).unwrap();
            let r = Routing::all_up(&t);
            Bench {
                t,
                r,
                rng: RandomStream::new(1, StreamId::DifsTiebreak),
            }
        }

        fn fabric(&mut self, scheduler: Scheduler) -> Fabric<'_> {
            Fabric {
                topo: &self.t,
                routing: &self.r,
                scheduler,
                mode: MetricMode::Count,
                elephant_threshold: 0,
                rng: &mut self.rng,
            }
        }
    }

    fn marked(flow: u32) -> Packet {
        let mut p = Packet::new(FlowId(flow), PacketFlags::ELEPHANT_MARK, 0, MSS);
        p.payload_len = MSS;
        p
    }

    #[test]
    fn unseen_marked_flow_installs_entry_and_counts_uplink() {
        let mut b = Bench::new();
        let edge = b.t.edge_switch(0, 0);
        let mut sw = SwitchState::new(&b.t, edge, 7);
        let k = key(&b.t, 0, 15, 0);
        let in_port = 0;
        let mut p = marked(0);
        let out = b
            .fabric(Scheduler::Difs)
            .forward(&mut sw, &mut p, in_port, &k, k.hash64(), SimTime::ZERO)
            .unwrap();
        assert!(p.flags.contains(PacketFlags::PAR_IMPLICIT));
        assert_eq!(sw.v_out()[out], 1);
        assert_eq!(sw.v_in()[in_port], 1);
        let e = sw.entry(FlowId(0)).unwrap();
        assert_eq!(e.l_out, b.t.ports(edge)[out].out_link);
        // seen flow keeps its link
        for i in 1..20 {
            let mut p = marked(0);
            let again = b
                .fabric(Scheduler::Difs)
                .forward(
                    &mut sw,
                    &mut p,
                    in_port,
                    &k,
                    k.hash64(),
                    SimTime::from_micros(i),
                )
                .unwrap();
            assert_eq!(again, out);
            assert!(!p.flags.contains(PacketFlags::PAR_IMPLICIT));
        }
        assert_eq!(sw.entry(FlowId(0)).unwrap().t, SimTime::from_micros(19));
        sw.check_psv().unwrap();
    }

    #[test]
    fn two_flows_at_idle_edge_take_different_uplinks() {
        let mut b = Bench::new();
        let edge = b.t.edge_switch(0, 0);
        let mut sw = SwitchState::new(&b.t, edge, 7);
        let k0 = key(&b.t, 0, 8, 0);
        let k1 = key(&b.t, 1, 12, 0);
        let mut p0 = marked(0);
        let mut p1 = marked(1);
        let a = b
            .fabric(Scheduler::Difs)
            .forward(&mut sw, &mut p0, 0, &k0, k0.hash64(), SimTime::ZERO)
            .unwrap();
        let c = b
            .fabric(Scheduler::Difs)
            .forward(&mut sw, &mut p1, 1, &k1, k1.hash64(), SimTime::ZERO)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ecmp_is_static_per_key_and_spreads_keys() {
        let mut b = Bench::new();
        let edge = b.t.edge_switch(0, 0);
        let mut sw = SwitchState::new(&b.t, edge, 7);
        let mut used = [0usize; 4];
        for serial in 0..200 {
            let k = key(&b.t, 0, 15, serial);
            let first = b
                .fabric(Scheduler::Ecmp)
                .forward(
                    &mut sw,
                    &mut marked(serial),
                    0,
                    &k,
                    k.hash64(),
                    SimTime::ZERO,
                )
                .unwrap();
            for _ in 0..3 {
                let again = b
                    .fabric(Scheduler::Ecmp)
                    .forward(
                        &mut sw,
                        &mut marked(serial),
                        0,
                        &k,
                        k.hash64(),
                        SimTime::ZERO,
                    )
                    .unwrap();
                assert_eq!(again, first);
            }
            used[first] += 1;
        }
        assert!(sw.entries().is_empty());
        // uplinks are ports 2 and 3; both see a fair share
        assert!(used[2] > 60 && used[3] > 60, "{used:?}");
    }

    #[test]
    fn acks_are_hashed_even_under_difs() {
        let mut b = Bench::new();
        let mut sw = SwitchState::new(&b.t, b.t.edge_switch(3, 1), 7);
        let k = key(&b.t, 0, 15, 0);
        let mut ack = Packet::new(FlowId(0), PacketFlags::ACK, 0, 0);
        b.fabric(Scheduler::Difs)
            .forward(&mut sw, &mut ack, 1, &k, k.hash64(), SimTime::ZERO)
            .unwrap();
        assert!(sw.entries().is_empty());
    }

    #[test]
    fn idle_entries_expire_and_decrement_psv() {
        let b = Bench::new();
        let mut sw = SwitchState::new(&b.t, b.t.edge_switch(0, 0), 7);
        let k0 = key(&b.t, 0, 8, 0);
        let k1 = key(&b.t, 1, 9, 0);
        sw.install(&b.t, k0, FlowId(0), 0, 2, SimTime::ZERO);
        sw.install(&b.t, k1, FlowId(1), 1, 2, SimTime::from_millis(9));
        let gone = sw.expire_flows(SimTime::from_millis(10), SimTime::from_millis(3));
        assert_eq!(gone.len(), 1);
        assert_eq!(gone[0].flow, FlowId(0));
        assert_eq!(sw.v_out()[2], 1);
        assert!(sw.entry(FlowId(1)).is_some());
        sw.check_psv().unwrap();
    }

    #[test]
    fn measured_rate_tracks_throughput() {
        let b = Bench::new();
        let mut sw = SwitchState::new(&b.t, b.t.edge_switch(0, 0), 7);
        let k0 = key(&b.t, 0, 8, 0);
        sw.install(&b.t, k0, FlowId(0), 0, 2, SimTime::ZERO);
        // 12.5 MB in 100 ms = 1 Gbps
        for i in 0..10_000u64 {
            let s = sw.slot_of(FlowId(0)).unwrap();
            sw.touch(&b.t, s, 0, 1250, SimTime::from_micros(i * 10));
        }
        sw.update_rates(SimTime::from_millis(100));
        let r = sw.entry(FlowId(0)).unwrap().measured_rate;
        assert!((r - 1e9).abs() < 1e3, "{r}");
        assert_eq!(sw.psv_out(MetricMode::MeasuredRate)[2], r);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Random install/move/remove/touch sequences keep the PSVs equal
            // to a brute-force recount.
            #[test]
            fn psv_matches_recount(ops in proptest::collection::vec((0u8..4, 0u32..12, 0usize..4, 0usize..4), 1..300)) {
                let t = build_fat_tree(4).unwrap();
                let mut sw = SwitchState::new(&t, t.edge_switch(0, 0), 1);
                for (i, (op, f, a, c)) in ops.into_iter().enumerate() {
                    let flow = FlowId(f);
                    let now = SimTime::from_micros(i as u64);
                    match (op, sw.entry(flow).is_some()) {
                        (0, false) => sw.install(&t, FlowKey::new(t.host(0), t.host(9), f), flow, a, c, now),
                        (1, true) => sw.move_flow(&t, flow, c),
                        (2, true) => { sw.remove(flow); }
                        (3, true) => {
                            let s = sw.slot_of(flow).unwrap();
                            sw.touch(&t, s, a, 100, now);
                        }
                        _ => {}
                    }
                    prop_assert!(sw.check_psv().is_ok(), "{:?}", sw.check_psv());
                }
            }
        }
    }
}
