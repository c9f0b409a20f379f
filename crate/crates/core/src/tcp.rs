//! TCP New Reno endpoints.
//!
//! Transfers are one-directional: the source host sends data, the
//! destination answers every segment with a cumulative ACK. Segment
//! boundaries are always multiples of the MSS from offset zero, so a
//! retransmission carries exactly the bytes of the original.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Packet, PacketFlags, MSS};
use crate::sim::{mix64, SimTime};
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_host: NodeId,
    pub dst_host: NodeId,
    pub flow_serial: u32,
}

impl FlowKey {
    pub fn new(src_host: NodeId, dst_host: NodeId, flow_serial: u32) -> Self {
        FlowKey {
            src_host,
            dst_host,
            flow_serial,
        }
    }

    /// Stable per-connection hash (the 5-tuple stand-in used by ECMP).
    pub fn hash64(&self) -> u64 {
        mix64(
            mix64(u64::from(self.src_host.0) << 32 | u64::from(self.dst_host.0))
                ^ u64::from(self.flow_serial),
        )
    }
}

/// Dense per-run connection index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct FlowId(pub u32);

impl FlowId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowSize {
    Bytes(u64),
    Permanent,
}

impl FlowSize {
    fn limit(self) -> u64 {
        match self {
            FlowSize::Bytes(n) => n,
            FlowSize::Permanent => u64::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcpConfig {
    pub init_cwnd_segments: u64,
    pub init_ssthresh: u64,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
    /// RTO used before the first RTT sample (covers SYN loss).
    pub initial_rto: SimTime,
    /// Advertised receive window in bytes. Without window scaling this is
    /// at most 65535.
    pub receive_window: u64,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            init_cwnd_segments: 2,
            init_ssthresh: 64 * 1024,
            min_rto: SimTime::from_millis(10),
            max_rto: SimTime::from_secs(1),
            initial_rto: SimTime::from_millis(100),
            receive_window: 65535,
        }
    }
}

/// Content of the segment `[seq, seq+len)` of a flow. Stands in for the
/// payload bytes themselves.
pub fn segment_digest(content_seed: u64, seq: u64, len: u32) -> u64 {
    mix64(content_seed ^ mix64(seq ^ (u64::from(len) << 48)))
}

/// Running digest of an application stream after appending one segment.
pub fn extend_stream_digest(acc: u64, segment: u64) -> u64 {
    mix64(acc.rotate_left(17) ^ segment)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SenderPhase {
    Idle,
    SynSent,
    Established,
    Complete,
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct SenderCounters {
    pub segments_sent: u64,
    pub retransmits: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    /// ACKs acknowledging bytes that were never sent.
    pub bogus_acks: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AckOutcome {
    pub newly_acked: u64,
    pub rtt_sample: Option<SimTime>,
    pub completed: bool,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    flow: FlowId,
    cfg: TcpConfig,
    content_seed: u64,
    phase: SenderPhase,
    pub cwnd: u64,
    pub ssthresh: u64,
    pub snd_una: u64,
    pub snd_next: u64,
    snd_max: u64,
    pub dup_acks: u32,
    in_recovery: bool,
    partial_acks: u32,
    pub recovery_point: u64,
    pub bytes_total: FlowSize,
    srtt: Option<u64>,
    rttvar: u64,
    pub rto: SimTime,
    backoff: u32,
    // (sequence that must be acked, send time); cleared by retransmission
    timed: Option<(u64, SimTime)>,
    syn_sent_at: Option<SimTime>,
    syn_retransmitted: bool,
    deadline: Option<SimTime>,
    counters: SenderCounters,
}

impl TcpSender {
    pub fn new(flow: FlowId, key: &FlowKey, size: FlowSize, cfg: TcpConfig) -> Self {
        TcpSender {
            flow,
            cfg,
            content_seed: key.hash64(),
            phase: SenderPhase::Idle,
            cwnd: cfg.init_cwnd_segments.max(1) * u64::from(MSS),
            ssthresh: cfg.init_ssthresh,
            snd_una: 0,
            snd_next: 0,
            snd_max: 0,
            dup_acks: 0,
            in_recovery: false,
            partial_acks: 0,
            recovery_point: 0,
            bytes_total: size,
            srtt: None,
            rttvar: 0,
            rto: cfg.initial_rto,
            backoff: 0,
            timed: None,
            syn_sent_at: None,
            syn_retransmitted: false,
            deadline: None,
            counters: SenderCounters::default(),
        }
    }

    pub fn flow(&self) -> FlowId {
        self.flow
    }

    pub fn phase(&self) -> SenderPhase {
        self.phase
    }

    pub fn in_recovery(&self) -> bool {
        self.in_recovery
    }

    pub fn bytes_acked(&self) -> u64 {
        self.snd_una
    }

    pub fn flight_size(&self) -> u64 {
        self.snd_max - self.snd_una
    }

    pub fn counters(&self) -> &SenderCounters {
        &self.counters
    }

    /// When the retransmission timer expires, if armed.
    pub fn timer_deadline(&self) -> Option<SimTime> {
        self.deadline
    }

    pub fn is_complete(&self) -> bool {
        self.phase == SenderPhase::Complete
    }

    fn syn(&self) -> Packet {
        Packet::new(self.flow, PacketFlags::SYN, 0, 0)
    }

    /// Begin the handshake.
    pub fn start(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        assert_eq!(self.phase, SenderPhase::Idle, "flow started twice");
        self.phase = SenderPhase::SynSent;
        self.syn_sent_at = Some(now);
        self.deadline = Some(now + self.rto);
        out.push(self.syn());
    }

    fn limit(&self) -> u64 {
        self.bytes_total.limit()
    }

    fn segment(&self, seq: u64) -> Packet {
        let len = (self.limit() - seq).min(u64::from(MSS)) as u32;
        let mut flags = PacketFlags::empty();
        if seq + u64::from(len) == self.limit() {
            flags.insert(PacketFlags::FIN);
        }
        let mut p = Packet::new(self.flow, flags, seq, len);
        p.payload_digest = segment_digest(self.content_seed, seq, len);
        p
    }

    fn retransmit(&mut self, seq: u64, out: &mut Vec<Packet>) {
        let mut p = self.segment(seq);
        p.flags.insert(PacketFlags::RETRANSMIT);
        self.counters.retransmits += 1;
        self.counters.segments_sent += 1;
        self.timed = None;
        out.push(p);
    }

    /// Send whatever the congestion and receive windows allow.
    fn transmit(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        if self.phase != SenderPhase::Established {
            return;
        }
        let limit = self.limit();
        let wnd = self.cwnd.min(self.cfg.receive_window);
        while self.snd_next < limit {
            let len = (limit - self.snd_next).min(u64::from(MSS));
            if self.snd_next - self.snd_una + len > wnd {
                break;
            }
            let seq = self.snd_next;
            if seq < self.snd_max {
                self.retransmit(seq, out);
            } else {
                out.push(self.segment(seq));
                self.counters.segments_sent += 1;
                if self.timed.is_none() {
                    self.timed = Some((seq + len, now));
                }
            }
            self.snd_next += len;
            self.snd_max = self.snd_max.max(self.snd_next);
        }
        if self.deadline.is_none() && self.snd_max > self.snd_una {
            self.deadline = Some(now + self.rto);
        }
    }

    fn rtt_update(&mut self, sample: SimTime) {
        let r = sample.as_nanos();
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2;
            }
            Some(s) => {
                self.rttvar = (3 * self.rttvar + s.abs_diff(r)) / 4;
                self.srtt = Some((7 * s + r) / 8);
            }
        }
        let rto = self.srtt.unwrap_or(r) + 4 * self.rttvar;
        self.backoff = 0;
        self.rto = SimTime::from_nanos(rto)
            .max(self.cfg.min_rto)
            .min(self.cfg.max_rto);
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt.map(SimTime::from_nanos)
    }

    pub fn on_ack(&mut self, ack: &Packet, now: SimTime, out: &mut Vec<Packet>) -> AckOutcome {
        debug_assert!(ack.flags.contains(PacketFlags::ACK));
        let mut outcome = AckOutcome::default();
        match self.phase {
            SenderPhase::Idle | SenderPhase::Complete => return outcome,
            SenderPhase::SynSent => {
                if !ack.flags.contains(PacketFlags::SYN) {
                    return outcome;
                }
                if let (Some(t), false) = (self.syn_sent_at, self.syn_retransmitted) {
                    let s = now - t;
                    self.rtt_update(s);
                    outcome.rtt_sample = Some(s);
                }
                self.phase = SenderPhase::Established;
                self.deadline = None;
                if self.limit() == 0 {
                    self.phase = SenderPhase::Complete;
                    outcome.completed = true;
                    return outcome;
                }
                self.transmit(now, out);
                return outcome;
            }
            SenderPhase::Established => {}
        }
        if ack.flags.contains(PacketFlags::SYN) {
            // duplicate SYN-ACK after a retransmitted SYN
            return outcome;
        }
        let a = ack.ack_seq;
        if a > self.snd_max {
            self.counters.bogus_acks += 1;
            return outcome;
        }
        let mss = u64::from(MSS);
        if a > self.snd_una {
            let acked = a - self.snd_una;
            outcome.newly_acked = acked;
            if let Some((end, t)) = self.timed {
                if a >= end {
                    let s = now - t;
                    self.rtt_update(s);
                    outcome.rtt_sample = Some(s);
                    self.timed = None;
                }
            }
            self.snd_una = a;
            if self.snd_next < a {
                self.snd_next = a;
            }
            if self.in_recovery {
                if a >= self.recovery_point {
                    self.in_recovery = false;
                    self.cwnd = self.ssthresh;
                    self.dup_acks = 0;
                } else {
                    // partial ACK: the next hole is lost too. Only the first
                    // one rearms the timer, so a window with many holes
                    // falls back to a timeout (the "impatient" variant).
                    self.retransmit(a, out);
                    self.cwnd = (self.cwnd.saturating_sub(acked) + mss).max(mss);
                    if self.partial_acks == 0 {
                        self.deadline = Some(now + self.rto);
                    }
                    self.partial_acks += 1;
                }
            } else {
                self.dup_acks = 0;
                if self.cwnd < self.ssthresh {
                    self.cwnd += mss;
                } else {
                    self.cwnd += (mss * mss / self.cwnd).max(1);
                }
            }
            self.deadline = if self.snd_max > self.snd_una {
                if self.in_recovery {
                    self.deadline
                } else {
                    Some(now + self.rto)
                }
            } else {
                None
            };
            if self.snd_una >= self.limit() {
                self.phase = SenderPhase::Complete;
                self.deadline = None;
                outcome.completed = true;
                return outcome;
            }
        } else if a == self.snd_una && self.snd_max > self.snd_una {
            self.dup_acks += 1;
            if self.in_recovery {
                self.cwnd += mss;
            } else if self.dup_acks == 3 && a >= self.recovery_point {
                self.ssthresh = (self.flight_size() / 2).max(2 * mss);
                self.recovery_point = self.snd_max;
                self.in_recovery = true;
                self.partial_acks = 0;
                self.counters.fast_retransmits += 1;
                self.retransmit(a, out);
                self.cwnd = self.ssthresh + 3 * mss;
            }
        }
        self.transmit(now, out);
        outcome
    }

    /// Handle expiry of the retransmission timer. Returns true if it fired.
    pub fn on_timer(&mut self, now: SimTime, out: &mut Vec<Packet>) -> bool {
        match self.deadline {
            Some(d) if d <= now => {}
            _ => return false,
        }
        self.counters.timeouts += 1;
        self.backoff += 1;
        self.rto = self.rto.mul(2).min(self.cfg.max_rto);
        self.deadline = Some(now + self.rto);
        match self.phase {
            SenderPhase::SynSent => {
                self.syn_retransmitted = true;
                out.push(self.syn());
            }
            SenderPhase::Established => {
                let mss = u64::from(MSS);
                self.ssthresh = (self.flight_size() / 2).max(2 * mss);
                self.cwnd = mss;
                self.in_recovery = false;
                self.dup_acks = 0;
                self.recovery_point = self.snd_max;
                self.snd_next = self.snd_una;
                self.timed = None;
                self.transmit(now, out);
            }
            SenderPhase::Idle | SenderPhase::Complete => self.deadline = None,
        }
        true
    }

    pub fn check_invariants(&self) {
        assert!(self.snd_una <= self.snd_next && self.snd_next <= self.snd_max);
        assert!(self.cwnd >= u64::from(MSS));
        if self.in_recovery {
            assert!(self.recovery_point > self.snd_una);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReorderStats {
    pub out_of_order_pkts: u64,
    pub in_order_pkts: u64,
    /// Sum of forward sequence gaps, in segments.
    pub gap_sum: u64,
    pub gap_samples: u64,
}

impl ReorderStats {
    pub fn ratio(&self) -> Option<f64> {
        (self.in_order_pkts > 0).then(|| self.out_of_order_pkts as f64 / self.in_order_pkts as f64)
    }

    pub fn window(&self) -> Option<f64> {
        (self.gap_samples > 0).then(|| self.gap_sum as f64 / self.gap_samples as f64)
    }

    pub fn merge(&mut self, other: &ReorderStats) {
        self.out_of_order_pkts += other.out_of_order_pkts;
        self.in_order_pkts += other.in_order_pkts;
        self.gap_sum += other.gap_sum;
        self.gap_samples += other.gap_samples;
    }
}

#[derive(Debug, Clone)]
pub struct TcpReceiver {
    flow: FlowId,
    content_seed: u64,
    rcv_next: u64,
    // next sequence expected from the sender's transmission order
    highest_next: u64,
    buffered: BTreeMap<u64, (u32, u64)>,
    stats: ReorderStats,
    stream_digest: u64,
    corrupt_segments: u64,
    duplicates: u64,
}

impl TcpReceiver {
    pub fn new(flow: FlowId, key: &FlowKey) -> Self {
        TcpReceiver {
            flow,
            content_seed: key.hash64(),
            rcv_next: 0,
            highest_next: 0,
            buffered: BTreeMap::new(),
            stats: ReorderStats::default(),
            stream_digest: 0,
            corrupt_segments: 0,
            duplicates: 0,
        }
    }

    pub fn stats(&self) -> &ReorderStats {
        &self.stats
    }

    /// Application bytes delivered in order.
    pub fn delivered(&self) -> u64 {
        self.rcv_next
    }

    pub fn stream_digest(&self) -> u64 {
        self.stream_digest
    }

    /// Segments whose content did not match their position in the stream.
    pub fn corrupt_segments(&self) -> u64 {
        self.corrupt_segments
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    fn ack(&self, flags: PacketFlags) -> Packet {
        let mut p = Packet::new(self.flow, flags | PacketFlags::ACK, 0, 0);
        p.ack_seq = self.rcv_next;
        p
    }

    fn deliver(&mut self, seq: u64, len: u32, digest: u64) {
        debug_assert_eq!(seq, self.rcv_next);
        if digest != segment_digest(self.content_seed, seq, len) {
            self.corrupt_segments += 1;
        }
        self.stream_digest = extend_stream_digest(self.stream_digest, digest);
        self.rcv_next += u64::from(len);
    }

    /// Accept one packet; returns the ACK to send back. The returned count
    /// is the number of application bytes newly delivered.
    pub fn on_receive(&mut self, p: &Packet) -> (Packet, u64) {
        if p.flags.contains(PacketFlags::SYN) {
            return (self.ack(PacketFlags::SYN), 0);
        }
        let before = self.rcv_next;
        let end = p.seq + u64::from(p.payload_len);
        let duplicate = end <= self.rcv_next || self.buffered.contains_key(&p.seq);
        if duplicate {
            self.duplicates += 1;
            return (self.ack(PacketFlags::empty()), 0);
        }
        if !p.flags.contains(PacketFlags::RETRANSMIT) {
            use std::cmp::Ordering::*;
            match p.seq.cmp(&self.highest_next) {
                Equal => self.stats.in_order_pkts += 1,
                Greater => {
                    self.stats.out_of_order_pkts += 1;
                    self.stats.gap_sum += (p.seq - self.highest_next).div_ceil(u64::from(MSS));
                    self.stats.gap_samples += 1;
                }
                Less => self.stats.out_of_order_pkts += 1,
            }
        }
        self.highest_next = self.highest_next.max(end);
        if p.seq == self.rcv_next {
            self.deliver(p.seq, p.payload_len, p.payload_digest);
            while let Some((&s, &(len, d))) = self.buffered.first_key_value() {
                if s != self.rcv_next {
                    break;
                }
                self.buffered.pop_first();
                self.deliver(s, len, d);
            }
        } else if p.seq > self.rcv_next {
            self.buffered
                .insert(p.seq, (p.payload_len, p.payload_digest));
        } else {
            // overlaps delivered data; segment boundaries never shift
            self.corrupt_segments += 1;
        }
        (self.ack(PacketFlags::empty()), self.rcv_next - before)
    }
}

pub struct FlowEntry {
    pub key: FlowKey,
    pub size: FlowSize,
    pub start: SimTime,
    pub sender: TcpSender,
    pub receiver: TcpReceiver,
    pub completed_at: Option<SimTime>,
}

/// All connections of a run, interned to dense `FlowId`s in open order.
#[derive(Default)]
pub struct Connections {
    ids: HashMap<FlowKey, FlowId>,
    flows: Vec<FlowEntry>,
    cfg: TcpConfig,
}

impl Connections {
    pub fn new(cfg: TcpConfig) -> Self {
        Connections {
            ids: HashMap::new(),
            flows: Vec::new(),
            cfg,
        }
    }

    pub fn open_flow(
        &mut self,
        key: FlowKey,
        size: FlowSize,
        start: SimTime,
        now: SimTime,
    ) -> Result<FlowId> {
        if self.ids.contains_key(&key) {
            return Err(Error::config(
                "flow",
                format!(
                    "duplicate flow {}->{} #{}",
                    key.src_host.0, key.dst_host.0, key.flow_serial
                ),
            ));
        }
        if key.src_host == key.dst_host {
            return Err(Error::config("flow", "source and destination coincide"));
        }
        if start < now {
            return Err(Error::config("flow", "start time is in the past"));
        }
        let id = FlowId(self.flows.len() as u32);
        self.ids.insert(key, id);
        self.flows.push(FlowEntry {
            key,
            size,
            start,
            sender: TcpSender::new(id, &key, size, self.cfg),
            receiver: TcpReceiver::new(id, &key),
            completed_at: None,
        });
        Ok(id)
    }

    pub fn lookup(&self, key: &FlowKey) -> Option<FlowId> {
        self.ids.get(key).copied()
    }

    pub fn get(&self, id: FlowId) -> &FlowEntry {
        &self.flows[id.index()]
    }

    pub fn get_mut(&mut self, id: FlowId) -> &mut FlowEntry {
        &mut self.flows[id.index()]
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlowEntry> {
        self.flows.iter()
    }
}
