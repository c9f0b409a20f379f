//! Discrete-event engine: integer nanosecond clock, a FIFO-on-ties event
//! queue and named, independently seeded random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Simulated time in nanoseconds.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Rounds to the nearest nanosecond.
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s.is_finite() && s >= 0.0, "invalid time {s}");
        SimTime((s * 1e9).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn mul(self, n: u64) -> SimTime {
        SimTime(self.0 * n)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Handle returned by [`EventQueue::schedule`]; permits cancellation before
/// the event fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Scheduled<E> {
    at: SimTime,
    seq: u64,
    ev: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap; invert so the earliest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// The event queue and virtual clock of one simulation run.
///
/// Events with equal fire times are dispatched in the order they were
/// scheduled. Every dispatched `(fire_at, seq)` pair is folded into a running
/// digest so that two runs can be compared for bit-identical traces.
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Scheduled<E>>,
    cancelled: HashSet<u64>,
    dispatched: u64,
    digest: u64,
    trace: Option<Vec<(SimTime, u64)>>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            dispatched: 0,
            digest: 0xcbf2_9ce4_8422_2325,
            trace: None,
        }
    }

    /// Keep the full `(fire_at, seq)` dispatch trace in memory.
    pub fn record_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> Option<&[(SimTime, u64)]> {
        self.trace.as_deref()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn trace_digest(&self) -> u64 {
        self.digest
    }

    /// Enqueue `ev` to fire at `at`.
    ///
    /// Scheduling into the past is a programming error and aborts the run.
    pub fn schedule(&mut self, at: SimTime, ev: E) -> EventHandle {
        if at < self.now {
            panic!(
                "event scheduled in the past: fire_at={:?} now={:?} (seq {})",
                at, self.now, self.next_seq
            );
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, ev });
        EventHandle(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, ev: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, ev)
    }

    /// Cancel a pending event. Cancelling an event that already fired has no
    /// effect.
    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.next_seq {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pop the next event due at or before `deadline`, advancing the clock.
    pub fn pop_due(&mut self, deadline: SimTime) -> Option<(SimTime, E)> {
        loop {
            match self.heap.peek() {
                Some(top) if top.at <= deadline => {}
                _ => return None,
            }
            let Scheduled { at, seq, ev } = self.heap.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&seq) {
                continue;
            }
            debug_assert!(at >= self.now);
            self.now = at;
            self.dispatched += 1;
            self.digest = mix64(self.digest ^ at.0).wrapping_add(seq);
            if let Some(trace) = self.trace.as_mut() {
                trace.push((at, seq));
            }
            return Some((at, ev));
        }
    }

    /// Dispatch every event with `fire_at <= deadline` through `handler`,
    /// then leave the clock at `deadline`.
    pub fn run_until<F>(&mut self, deadline: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Self, E),
    {
        while let Some((_, ev)) = self.pop_due(deadline) {
            handler(self, ev);
        }
        if deadline > self.now {
            self.now = deadline;
        }
        self.now
    }

    /// Move the clock forward without dispatching (used after a drained run).
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The independent random consumers of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    EcmpHashSalt,
    DifsTiebreak,
    TrafficGen,
    EarTargetPick,
}

impl StreamId {
    pub fn label(self) -> &'static str {
        match self {
            StreamId::EcmpHashSalt => "ecmp-hash-salt",
            StreamId::DifsTiebreak => "difs-tiebreak",
            StreamId::TrafficGen => "traffic-gen",
            StreamId::EarTargetPick => "ear-target-pick",
        }
    }
}

/// A seeded ChaCha8 stream keyed by `(seed, label)`.
///
/// ChaCha output is platform independent, and all range draws go through
/// fixed-width integers, so a `(seed, label)` pair yields the same sequence
/// everywhere.
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        Self::with_label(seed, id.label())
    }

    pub fn with_label(seed: u64, label: &str) -> Self {
        let mut state = seed ^ fnv1a(label.as_bytes());
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            state = mix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RandomStream {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() on empty range");
        self.rng.gen_range(0..n as u64) as usize
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Fisher-Yates shuffle using [`RandomStream::index`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        if items.is_empty() {
            None
        } else {
            Some(&items[self.index(items.len())])
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_at_now_fires_next() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::ZERO, "a");
        assert_eq!(q.pop_due(SimTime::ZERO), Some((SimTime::ZERO, "a")));
    }

    #[test]
    fn ties_dispatch_fifo() {
        let mut q = EventQueue::new();
        q.record_trace();
        let t = SimTime::from_nanos(5);
        q.schedule(t, 1);
        q.schedule(t, 2);
        let mut seen = Vec::new();
        q.run_until(SimTime::from_nanos(10), |_, e| seen.push(e));
        assert_eq!(seen, vec![1, 2]);
        assert_eq!(q.trace().unwrap(), &[(t, 0), (t, 1)]);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_past_aborts() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_nanos(7), ());
        q.pop_due(SimTime::MAX);
        q.schedule(SimTime::from_nanos(3), ());
    }

    #[test]
    fn empty_run_returns_deadline() {
        let mut q: EventQueue<()> = EventQueue::new();
        let end = q.run_until(SimTime::from_secs(60), |_, _| panic!("no events"));
        assert_eq!(end, SimTime::from_secs(60));
    }

    #[test]
    fn single_event_dispatches_once() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(10), ());
        let mut n = 0;
        q.run_until(SimTime::from_secs(60), |_, _| n += 1);
        assert_eq!(n, 1);
    }

    #[test]
    fn cascading_events_both_dispatch() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(10), 10u64);
        let mut seen = Vec::new();
        q.run_until(SimTime::from_secs(60), |q, e| {
            seen.push((q.now(), e));
            if e == 10 {
                q.schedule(SimTime::from_secs(20), 20);
            }
        });
        assert_eq!(
            seen,
            vec![(SimTime::from_secs(10), 10), (SimTime::from_secs(20), 20)]
        );
    }

    #[test]
    fn cancelled_events_do_not_fire() {
        let mut q = EventQueue::new();
        let h = q.schedule(SimTime::from_nanos(1), "x");
        q.schedule(SimTime::from_nanos(2), "y");
        q.cancel(h);
        let mut seen = Vec::new();
        q.run_until(SimTime::from_nanos(5), |_, e| seen.push(e));
        assert_eq!(seen, vec!["y"]);
    }

    #[test]
    fn events_past_deadline_stay_queued() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(70), ());
        q.run_until(SimTime::from_secs(60), |_, _| panic!("too early"));
        assert_eq!(q.pending(), 1);
        assert_eq!(q.now(), SimTime::from_secs(60));
    }

    #[test]
    fn streams_are_reproducible_and_independent() {
        let a: Vec<u64> = {
            let mut s = RandomStream::new(42, StreamId::TrafficGen);
            (0..8).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = RandomStream::new(42, StreamId::TrafficGen);
            (0..8).map(|_| s.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut s = RandomStream::new(42, StreamId::DifsTiebreak);
            (0..8).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn link_delay_and_control_period_are_exact() {
        assert_eq!(SimTime::from_secs_f64(0.01e-3), SimTime::from_micros(10));
        assert_eq!(SimTime::from_secs_f64(0.01), SimTime::from_millis(10));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dispatch_order_is_sorted_by_time_then_seq(times in proptest::collection::vec(0u64..50, 1..60)) {
                let mut q = EventQueue::new();
                q.record_trace();
                for (i, t) in times.iter().enumerate() {
                    q.schedule(SimTime::from_nanos(*t), i);
                }
                let mut last = SimTime::ZERO;
                q.run_until(SimTime::from_nanos(100), |q, _| {
                    assert!(q.now() >= last);
                    last = q.now();
                });
                let trace = q.trace().unwrap().to_vec();
                let mut sorted = trace.clone();
                sorted.sort();
                prop_assert_eq!(trace, sorted);
            }
        }
    }
}
