//! Packets and the per-link output queue model: FIFO drop-tail buffering,
//! serialization at the link rate, then fixed propagation delay.

use std::collections::VecDeque;

use serde::Serialize;

use crate::sim::SimTime;
use crate::tcp::FlowId;
use crate::topology::{Link, LinkId};

/// TCP maximum segment size (payload bytes).
pub const MSS: u32 = 1460;
/// TCP/IP header bytes carried by every packet.
pub const HEADER_LEN: u32 = 40;
/// Largest packet on the wire.
pub const MTU: u32 = MSS + HEADER_LEN;
/// Default per-port buffer floor, in full-size packets.
pub const DEFAULT_QUEUE_FLOOR_PACKETS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PacketFlags(u8);

impl PacketFlags {
    pub const SYN: PacketFlags = PacketFlags(1);
    pub const ACK: PacketFlags = PacketFlags(1 << 1);
    pub const FIN: PacketFlags = PacketFlags(1 << 2);
    pub const ELEPHANT_MARK: PacketFlags = PacketFlags(1 << 3);
    pub const PAR_IMPLICIT: PacketFlags = PacketFlags(1 << 4);
    /// Sender-side retransmission; lets receivers keep such segments out of
    /// reordering statistics.
    pub const RETRANSMIT: PacketFlags = PacketFlags(1 << 5);

    pub const fn empty() -> Self {
        PacketFlags(0)
    }

    pub fn contains(self, other: PacketFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: PacketFlags) {
        self.0 |= other.0;
    }

    pub fn remove(&mut self, other: PacketFlags) {
        self.0 &= !other.0;
    }
}

impl std::ops::BitOr for PacketFlags {
    type Output = PacketFlags;
    fn bitor(self, rhs: PacketFlags) -> PacketFlags {
        PacketFlags(self.0 | rhs.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Packet {
    pub flow: FlowId,
    pub flags: PacketFlags,
    pub header_len: u16,
    pub payload_len: u32,
    /// Byte offset of the first payload byte.
    pub seq: u64,
    /// Cumulative acknowledgement (valid with `ACK`).
    pub ack_seq: u64,
    /// Time the packet was admitted to its current queue.
    pub enq_time: SimTime,
    /// Digest of the payload content, checked on in-order delivery.
    pub payload_digest: u64,
    /// Running digest of the links this packet traversed.
    pub path_digest: u64,
}

impl Packet {
    pub fn new(flow: FlowId, flags: PacketFlags, seq: u64, payload_len: u32) -> Self {
        debug_assert!(payload_len <= MSS);
        Packet {
            flow,
            flags,
            header_len: HEADER_LEN as u16,
            payload_len,
            seq,
            ack_seq: 0,
            enq_time: SimTime::ZERO,
            payload_digest: 0,
            path_digest: 0,
        }
    }

    pub fn size_bytes(&self) -> u64 {
        u64::from(self.header_len) + u64::from(self.payload_len)
    }

    /// ACK-bearing packets travel from the flow's destination to its source.
    pub fn is_reverse(&self) -> bool {
        self.flags.contains(PacketFlags::ACK)
    }
}

/// Time to clock `bytes` onto a link of `bps`, rounded up to whole ns.
pub fn serialization_time(bytes: u64, bps: u64) -> SimTime {
    SimTime::from_nanos((bytes * 8 * 1_000_000_000).div_ceil(bps))
}

/// Buffer size for a link: its delay-bandwidth product in bytes, but never
/// less than `min_packets` full-size packets (and never less than one).
pub fn delay_bandwidth_capacity(capacity_bps: u64, delay: SimTime, min_packets: u64) -> u64 {
    let raw = (u128::from(capacity_bps) * u128::from(delay.as_nanos())).div_ceil(8_000_000_000);
    let floor = min_packets.max(1) * u64::from(MTU);
    (raw as u64).max(floor)
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct LinkCounters {
    pub offered_pkts: u64,
    pub offered_bytes: u64,
    pub dropped_pkts: u64,
    pub dropped_bytes: u64,
    pub delivered_pkts: u64,
    pub delivered_bytes: u64,
    /// Total serialization time of admitted packets.
    pub busy_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enqueued {
    /// Admitted. `first_in_line` is set when the queue was empty, i.e. the
    /// caller must schedule delivery at `arrive`.
    Accepted {
        arrive: SimTime,
        first_in_line: bool,
    },
    Dropped,
}

impl Enqueued {
    pub fn accepted(&self) -> bool {
        matches!(self, Enqueued::Accepted { .. })
    }
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    pkt: Packet,
    depart: SimTime,
    arrive: SimTime,
}

/// Output queue plus wire of one directed link.
///
/// Packets wait in a FIFO buffer while earlier packets serialize, then spend
/// the propagation delay on the wire. Both stages live in one deque; a
/// cursor marks how many entries at the front have finished serializing.
#[derive(Debug, Clone)]
pub struct LinkQueue {
    link: LinkId,
    capacity_bytes: u64,
    bandwidth_bps: u64,
    delay: SimTime,
    entries: VecDeque<InFlight>,
    departed: usize,
    buffered_bytes: u64,
    busy_until: SimTime,
    up: bool,
    counters: LinkCounters,
}

impl LinkQueue {
    pub fn new(link: LinkId, bandwidth_bps: u64, delay: SimTime, capacity_bytes: u64) -> Self {
        assert!(bandwidth_bps > 0 && delay > SimTime::ZERO);
        LinkQueue {
            link,
            capacity_bytes,
            bandwidth_bps,
            delay,
            entries: VecDeque::new(),
            departed: 0,
            buffered_bytes: 0,
            busy_until: SimTime::ZERO,
            up: true,
            counters: LinkCounters::default(),
        }
    }

    pub fn for_link(id: LinkId, link: &Link, min_packets: u64) -> Self {
        let cap = delay_bandwidth_capacity(link.capacity_bps, link.delay, min_packets);
        LinkQueue::new(id, link.capacity_bps, link.delay, cap)
    }

    pub fn link(&self) -> LinkId {
        self.link
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn counters(&self) -> &LinkCounters {
        &self.counters
    }

    pub fn is_up(&self) -> bool {
        self.up
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    /// Bytes admitted but not yet fully serialized at `now`.
    pub fn occupancy(&mut self, now: SimTime) -> u64 {
        self.retire(now);
        self.buffered_bytes
    }

    /// Bytes admitted but not yet delivered (buffered or on the wire).
    pub fn in_flight_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.pkt.size_bytes()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn retire(&mut self, now: SimTime) {
        while let Some(e) = self.entries.get(self.departed) {
            if e.depart > now {
                break;
            }
            self.buffered_bytes -= e.pkt.size_bytes();
            self.departed += 1;
        }
    }

    pub fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> Enqueued {
        let size = pkt.size_bytes();
        self.counters.offered_pkts += 1;
        self.counters.offered_bytes += size;
        self.retire(now);
        if !self.up || self.buffered_bytes + size > self.capacity_bytes {
            self.counters.dropped_pkts += 1;
            self.counters.dropped_bytes += size;
            return Enqueued::Dropped;
        }
        let ser = serialization_time(size, self.bandwidth_bps);
        let start = self.busy_until.max(now);
        let depart = start + ser;
        let arrive = depart + self.delay;
        self.busy_until = depart;
        self.buffered_bytes += size;
        self.counters.busy_ns += ser.as_nanos();
        pkt.enq_time = now;
        let first_in_line = self.entries.is_empty();
        self.entries.push_back(InFlight {
            pkt,
            depart,
            arrive,
        });
        Enqueued::Accepted {
            arrive,
            first_in_line,
        }
    }

    /// Arrival time of the packet at the head of the wire, if any.
    pub fn next_arrival(&self) -> Option<SimTime> {
        self.entries.front().map(|e| e.arrive)
    }

    /// Remove the head packet if it has reached the far end by `now`.
    pub fn deliver(&mut self, now: SimTime) -> Option<Packet> {
        match self.entries.front() {
            Some(e) if e.arrive <= now => {}
            _ => return None,
        }
        self.retire(now);
        let e = self.entries.pop_front().expect("front checked");
        debug_assert!(self.departed > 0);
        self.departed -= 1;
        self.counters.delivered_pkts += 1;
        self.counters.delivered_bytes += e.pkt.size_bytes();
        Some(e.pkt)
    }

    /// Take the link down: everything buffered or on the wire is lost, and
    /// later arrivals are dropped.
    pub fn fail(&mut self) -> Vec<Packet> {
        self.up = false;
        let lost: Vec<Packet> = self.entries.drain(..).map(|e| e.pkt).collect();
        for p in &lost {
            self.counters.dropped_pkts += 1;
            self.counters.dropped_bytes += p.size_bytes();
        }
        self.departed = 0;
        self.buffered_bytes = 0;
        lost
    }
}
