//! Benchmark traffic: the static communication patterns and the
//! all-to-all shuffle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RandomStream, SimTime};
use crate::tcp::{FlowKey, FlowSize};
use crate::topology::{NodeId, Topology};

/// Desk-scale shuffle transfer size.
pub const DEFAULT_SHUFFLE_BYTES: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TrafficPattern {
    Stride(usize),
    Staggered { pe: f64, pp: f64 },
    Random,
    RandX(usize),
    RandBij,
    Shuffle { bytes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSpec {
    pub key: FlowKey,
    pub size: FlowSize,
    pub start: SimTime,
}

impl TrafficPattern {
    pub fn validate(&self, num_hosts: usize) -> Result<()> {
        match *self {
            TrafficPattern::Stride(i) if i == 0 || i >= num_hosts => Err(Error::config(
                "pattern",
                format!("stride must be in 1..{num_hosts}, got {i}"),
            )),
            TrafficPattern::Staggered { pe, pp }
                if !(0.0..=1.0).contains(&pe) || !(0.0..=1.0).contains(&pp) || pe + pp > 1.0 =>
            {
                Err(Error::config(
                    "pattern",
                    format!(
                        "staggered probabilities must be in [0,1] with Pe+Pp <= 1, got {pe}, {pp}"
                    ),
                ))
            }
            TrafficPattern::RandX(0) => Err(Error::config("pattern", "randx needs x >= 1")),
            _ if num_hosts < 2 => Err(Error::config("pattern", "need at least two hosts")),
            _ => Ok(()),
        }
    }

    pub fn is_shuffle(&self) -> bool {
        matches!(self, TrafficPattern::Shuffle { .. })
    }

    /// Flows of a static pattern: permanent, all starting at t=0. For the
    /// shuffle this is each receiver's first transfer; the rest follow
    /// through [`ShuffleJob`].
    pub fn generate(&self, topo: &Topology, rng: &mut RandomStream) -> Result<Vec<FlowSpec>> {
        let n = topo.num_hosts();
        self.validate(n)?;
        let hosts: Vec<NodeId> = topo.hosts().collect();
        let permanent = |src: NodeId, dst: NodeId, serial: u32| FlowSpec {
            key: FlowKey::new(src, dst, serial),
            size: FlowSize::Permanent,
            start: SimTime::ZERO,
        };
        let other = |rng: &mut RandomStream, x: usize| -> NodeId {
            let j = rng.index(n - 1);
            hosts[if j >= x { j + 1 } else { j }]
        };
        let flows = match *self {
            TrafficPattern::Stride(i) => (0..n)
                .map(|x| permanent(hosts[x], hosts[(x + i) % n], 0))
                .collect(),
            TrafficPattern::Staggered { pe, pp } => hosts
                .iter()
                .map(|&h| permanent(h, staggered_destination(topo, h, pe, pp, rng), 0))
                .collect(),
            TrafficPattern::Random => (0..n)
                .map(|x| permanent(hosts[x], other(rng, x), 0))
                .collect(),
            TrafficPattern::RandX(count) => {
                let mut v = Vec::with_capacity(n * count);
                for x in 0..n {
                    for s in 0..count {
                        v.push(permanent(hosts[x], other(rng, x), s as u32));
                    }
                }
                v
            }
            TrafficPattern::RandBij => {
                let perm = derangement(n, rng);
                (0..n)
                    .map(|x| permanent(hosts[x], hosts[perm[x]], 0))
                    .collect()
            }
            TrafficPattern::Shuffle { bytes } => {
                ShuffleJob::new(topo, bytes, rng).first_transfers()
            }
        };
        Ok(flows)
    }
}

/// Destination class draw for one staggered source.
fn staggered_destination(
    topo: &Topology,
    src: NodeId,
    pe: f64,
    pp: f64,
    rng: &mut RandomStream,
) -> NodeId {
    let edge = topo.edge_of_host(src);
    let pod = topo.pod_of(src);
    let u = rng.unit();
    let pool: Vec<NodeId> = if u < pe {
        topo.hosts()
            .filter(|&h| h != src && topo.edge_of_host(h) == edge)
            .collect()
    } else if u < pe + pp {
        topo.hosts()
            .filter(|&h| topo.pod_of(h) == pod && topo.edge_of_host(h) != edge)
            .collect()
    } else {
        topo.hosts().filter(|&h| topo.pod_of(h) != pod).collect()
    };
    pool[rng.index(pool.len())]
}

/// Uniform random permutation without fixed points, by rejection.
fn derangement(n: usize, rng: &mut RandomStream) -> Vec<usize> {
    assert!(n >= 2);
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        rng.shuffle(&mut p);
        if p.iter().enumerate().all(|(i, &d)| i != d) {
            return p;
        }
    }
}

/// All-to-all transfer: every host receives once from every other host,
/// one transfer at a time, visiting senders in its own random order.
#[derive(Debug, Clone)]
pub struct ShuffleJob {
    bytes: u64,
    receivers: Vec<NodeId>,
    order: Vec<Vec<NodeId>>,
    next: Vec<usize>,
    finished: Vec<Option<SimTime>>,
}

impl ShuffleJob {
    pub fn new(topo: &Topology, bytes: u64, rng: &mut RandomStream) -> Self {
        let receivers: Vec<NodeId> = topo.hosts().collect();
        let order = receivers
            .iter()
            .map(|&r| {
                let mut senders: Vec<NodeId> =
                    receivers.iter().copied().filter(|&s| s != r).collect();
                rng.shuffle(&mut senders);
                senders
            })
            .collect();
        ShuffleJob {
            bytes,
            next: vec![0; receivers.len()],
            finished: vec![None; receivers.len()],
            receivers,
            order,
        }
    }

    pub fn bytes_per_transfer(&self) -> u64 {
        self.bytes
    }

    pub fn num_transfers(&self) -> usize {
        self.order.iter().map(Vec::len).sum()
    }

    fn spec(&self, r: usize, s: NodeId, start: SimTime) -> FlowSpec {
        FlowSpec {
            key: FlowKey::new(s, self.receivers[r], 0),
            size: FlowSize::Bytes(self.bytes),
            start,
        }
    }

    /// Every receiver's first transfer, starting at t=0.
    pub fn first_transfers(&mut self) -> Vec<FlowSpec> {
        (0..self.receivers.len())
            .filter_map(|r| self.advance(r, SimTime::ZERO))
            .collect()
    }

    fn advance(&mut self, r: usize, now: SimTime) -> Option<FlowSpec> {
        let i = self.next[r];
        if let Some(&s) = self.order[r].get(i) {
            self.next[r] += 1;
            Some(self.spec(r, s, now))
        } else {
            self.finished[r] = Some(now);
            None
        }
    }

    /// Called when `receiver`'s current transfer completes.
    pub fn next_shuffle_transfer(&mut self, receiver: NodeId, now: SimTime) -> Option<FlowSpec> {
        let r = receiver.index();
        assert!(self.finished[r].is_none(), "receiver already finished");
        self.advance(r, now)
    }

    /// Time each host finished receiving, if it has.
    pub fn completion_times(&self) -> &[Option<SimTime>] {
        &self.finished
    }

    pub fn done(&self) -> bool {
        self.finished.iter().all(Option::is_some)
    }
}

/// Parse a byte count like `5MB`, `500KB`, `1GB` or `1234` (decimal units).
pub fn parse_bytes(s: &str) -> Result<u64> {
    let t = s.trim();
    let split = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let mult = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1.0,
        "KB" | "K" => 1e3,
        "MB" | "M" => 1e6,
        "GB" | "G" => 1e9,
        u => {
            return Err(Error::config(
                "bytes",
                format!("unknown unit {u:?} in {s:?}"),
            ))
        }
    };
    let v: f64 = num
        .parse()
        .map_err(|_| Error::config("bytes", format!("bad number in {s:?}")))?;
    if !(v >= 0.0) {
        return Err(Error::config("bytes", format!("negative size {s:?}")));
    }
    Ok((v * mult).round() as u64)
}

fn format_bytes(b: u64) -> String {
    for (unit, m) in [("GB", 1_000_000_000), ("MB", 1_000_000), ("KB", 1_000)] {
        if b >= m && b % m == 0 {
            return format!("{}{unit}", b / m);
        }
    }
    format!("{b}B")
}

impl FromStr for TrafficPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::config("pattern", format!("cannot parse {s:?}"));
        let int = |p: &str| p.parse::<usize>().map_err(|_| bad());
        let prob = |p: &str| p.parse::<f64>().map_err(|_| bad());
        let pattern = match parts.as_slice() {
            ["stride", i] => TrafficPattern::Stride(int(i)?),
            ["stag", pe, pp] | ["staggered", pe, pp] => TrafficPattern::Staggered {
                pe: prob(pe)?,
                pp: prob(pp)?,
            },
            ["random"] => TrafficPattern::Random,
            ["randx", x] => TrafficPattern::RandX(int(x)?),
            ["randbij"] => TrafficPattern::RandBij,
            ["shuffle"] => TrafficPattern::Shuffle {
                bytes: DEFAULT_SHUFFLE_BYTES,
            },
            ["shuffle", b] => TrafficPattern::Shuffle {
                bytes: parse_bytes(b)?,
            },
            _ => return Err(bad()),
        };
        if let TrafficPattern::Staggered { pe, pp } = pattern {
            if pe < 0.0 || pp < 0.0 || pe + pp > 1.0 {
                return Err(Error::config(
                    "pattern",
                    format!("staggered needs Pe, Pp >= 0 and Pe+Pp <= 1, got {s:?}"),
                ));
            }
        }
        Ok(pattern)
    }
}

impl fmt::Display for TrafficPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TrafficPattern::Stride(i) => write!(f, "stride:{i}"),
            TrafficPattern::Staggered { pe, pp } => write!(f, "stag:{pe}:{pp}"),
            TrafficPattern::Random => write!(f, "random"),
            TrafficPattern::RandX(x) => write!(f, "randx:{x}"),
            TrafficPattern::RandBij => write!(f, "randbij"),
            TrafficPattern::Shuffle { bytes } => write!(f, "shuffle:{}", format_bytes(bytes)),
        }
    }
}

impl TryFrom<String> for TrafficPattern {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TrafficPattern> for String {
    fn from(p: TrafficPattern) -> String {
        p.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::StreamId;
    use crate::topology::build_fat_tree;
    use std::collections::BTreeSet;

    fn rng(seed: u64) -> RandomStream {
        RandomStream::new(seed, StreamId::TrafficGen)
    }

    #[test]
    fn pattern_strings_round_trip() {
        for s in [
            "stride:4",
            "stag:0.5:0.3",
            "random",
            "randx:3",
            "randbij",
            "shuffle:5MB",
        ] {
            let p: TrafficPattern = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!(
            "shuffle".parse::<TrafficPattern>().unwrap(),
            TrafficPattern::Shuffle { bytes: 5_000_000 }
        );
        assert_eq!(parse_bytes("500MB").unwrap(), 500_000_000);
        assert_eq!(parse_bytes("1.5KB").unwrap(), 1500);
        for bad in ["stride", "stride:x", "stag:0.7:0.6", "zipf", "shuffle:5XB"] {
            assert!(bad.parse::<TrafficPattern>().is_err(), "{bad}");
        }
    }

    #[test]
    fn stride_one_sends_to_next_host() {
        let t = build_fat_tree(4).unwrap();
        let flows = TrafficPattern::Stride(1).generate(&t, &mut rng(0)).unwrap();
        assert_eq!(flows.len(), 16);
        for (h, f) in flows.iter().enumerate() {
            assert_eq!(f.key.src_host, t.host(h));
            assert_eq!(f.key.dst_host, t.host((h + 1) % 16));
            assert_eq!(f.size, FlowSize::Permanent);
            assert_eq!(f.start, SimTime::ZERO);
        }
        assert!(TrafficPattern::Stride(16)
            .generate(&t, &mut rng(0))
            .is_err());
        assert!(TrafficPattern::Stride(0).generate(&t, &mut rng(0)).is_err());
    }

    #[test]
    fn randx_gives_each_host_x_flows() {
        let t = build_fat_tree(4).unwrap();
        let flows = TrafficPattern::RandX(3).generate(&t, &mut rng(7)).unwrap();
        assert_eq!(flows.len(), 48);
        for h in t.hosts() {
            let mine: Vec<_> = flows.iter().filter(|f| f.key.src_host == h).collect();
            assert_eq!(mine.len(), 3);
            assert!(mine.iter().all(|f| f.key.dst_host != h));
        }
        let keys: BTreeSet<_> = flows.iter().map(|f| f.key).collect();
        assert_eq!(keys.len(), 48);
    }

    #[test]
    fn random_never_targets_self_and_is_seeded() {
        let t = build_fat_tree(4).unwrap();
        let a = TrafficPattern::Random.generate(&t, &mut rng(3)).unwrap();
        let b = TrafficPattern::Random.generate(&t, &mut rng(3)).unwrap();
        let c = TrafficPattern::Random.generate(&t, &mut rng(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|f| f.key.src_host != f.key.dst_host));
    }

    #[test]
    fn randbij_is_a_derangement() {
        let t = build_fat_tree(4).unwrap();
        for seed in 0..50 {
            let flows = TrafficPattern::RandBij
                .generate(&t, &mut rng(seed))
                .unwrap();
            let dsts: BTreeSet<_> = flows.iter().map(|f| f.key.dst_host).collect();
            assert_eq!(dsts.len(), 16);
            assert!(flows.iter().all(|f| f.key.src_host != f.key.dst_host));
        }
    }

    /// Class frequencies over 10^4 draws lie within 3 sigma of (Pe, Pp, rest).
    #[test]
    fn staggered_class_frequencies() {
        let t = build_fat_tree(4).unwrap();
        let (pe, pp) = (0.5, 0.3);
        let mut r = rng(11);
        let draws = 10_000;
        let mut counts = [0f64; 3];
        for i in 0..draws {
            let src = t.host(i % 16);
            let d = staggered_destination(&t, src, pe, pp, &mut r);
            assert_ne!(d, src);
            let class = if t.edge_of_host(d) == t.edge_of_host(src) {
                0
            } else if t.pod_of(d) == t.pod_of(src) {
                1
            } else {
                2
            };
            counts[class] += 1.0;
        }
        let n = draws as f64;
        for (c, p) in counts.iter().zip([pe, pp, 1.0 - pe - pp]) {
            let sigma = (n * p * (1.0 - p)).sqrt();
            assert!((c - n * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn shuffle_sizes_and_progression() {
        let t = build_fat_tree(4).unwrap();
        let mut job = ShuffleJob::new(&t, 500_000_000, &mut rng(1));
        assert_eq!(job.num_transfers(), 240);
        assert_eq!(
            job.num_transfers() as u64 * job.bytes_per_transfer(),
            120_000_000_000
        );
        let first = job.first_transfers();
        assert_eq!(first.len(), 16);
        // receiver 0 walks through all 15 senders, then is done
        let r0 = t.host(0);
        let mut senders = BTreeSet::new();
        senders.insert(first[0].key.src_host);
        let mut now = SimTime::ZERO;
        for _ in 0..14 {
            now += SimTime::from_millis(5);
            let next = job.next_shuffle_transfer(r0, now).unwrap();
            assert_eq!(next.key.dst_host, r0);
            assert_eq!(next.start, now);
            senders.insert(next.key.src_host);
        }
        assert_eq!(senders.len(), 15);
        assert!(!senders.contains(&r0));
        assert!(job.next_shuffle_transfer(r0, now).is_none());
        assert_eq!(job.completion_times()[0], Some(now));
        // other receivers are unaffected
        assert!(job.completion_times()[1].is_none());
        assert!(job.next_shuffle_transfer(t.host(1), now).is_some());
    }

    #[test]
    fn shuffle_orders_differ_per_receiver() {
        let t = build_fat_tree(4).unwrap();
        let job = ShuffleJob::new(&t, 1, &mut rng(2));
        let distinct: BTreeSet<_> = job
            .order
            .iter()
            .map(|o| o.iter().map(|h| h.0).collect::<Vec<_>>())
            .collect();
        assert!(distinct.len() > 8);
    }
}
