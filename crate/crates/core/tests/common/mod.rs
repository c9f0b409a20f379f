#![allow(dead_code)]

use difsim::fabric::Scheduler;
use difsim::harness::{ExperimentConfig, World};
use difsim::network::MSS;
use difsim::sim::SimTime;
use difsim::tcp::{extend_stream_digest, segment_digest, FlowId, FlowKey, FlowSize};
use difsim::traffic::FlowSpec;

pub fn short(scheduler: Scheduler, pattern: &str, duration: f64) -> ExperimentConfig {
    ExperimentConfig {
        scheduler,
        pattern: pattern.parse().unwrap(),
        duration,
        ..Default::default()
    }
}

pub fn one_flow(
    w: &mut World,
    src: (usize, usize, usize),
    dst: (usize, usize, usize),
    size: FlowSize,
) -> FlowId {
    let t = w.topo();
    let key = FlowKey::new(
        t.host_at(src.0, src.1, src.2),
        t.host_at(dst.0, dst.1, dst.2),
        0,
    );
    w.add_flow(FlowSpec {
        key,
        size,
        start: SimTime::ZERO,
    })
    .unwrap()
}

/// Digest of the byte stream a sender produces for `key`, segment by segment.
pub fn expected_digest(key: &FlowKey, total: u64) -> u64 {
    let mut acc = 0;
    let mut seq = 0;
    while seq < total {
        let len = (total - seq).min(u64::from(MSS)) as u32;
        acc = extend_stream_digest(acc, segment_digest(key.hash64(), seq, len));
        seq += u64::from(len);
    }
    acc
}

/// Goodput of one permanent flow on an otherwise idle k=4 network, as a
/// fraction of the link rate over 0.1..0.6 s.
pub fn idle_path_goodput(scheduler: Scheduler) -> f64 {
    let cfg = short(scheduler, "random", 1.0);
    let mut w = World::new(&cfg).unwrap();
    let f = one_flow(&mut w, (0, 0, 0), (3, 1, 1), FlowSize::Permanent);
    w.run_until(SimTime::from_millis(100));
    let before = w.conns().get(f).receiver.delivered();
    w.run_until(SimTime::from_millis(600));
    assert_eq!(w.conns().get(f).receiver.corrupt_segments(), 0);
    let got = w.conns().get(f).receiver.delivered() - before;
    got as f64 * 8.0 / 0.5 / cfg.link_capacity_bps as f64
}

#[derive(Debug)]
pub struct BounceResult {
    pub completed: bool,
    pub commands: usize,
    pub path_changes: u64,
    pub corrupt: u64,
    pub delivered: u64,
    pub total: u64,
    pub digest_matches: bool,
}

impl BounceResult {
    pub fn ok(&self) -> bool {
        self.completed
            && self.commands > 10
            && self.path_changes > 10
            && self.corrupt == 0
            && self.delivered == self.total
            && self.digest_matches
    }
}

/// Send a finite flow across pods while repeatedly moving it between the
/// uplinks of its source edge and between the cores above each aggregate.
pub fn bounce_flow(total: u64) -> BounceResult {
    let cfg = short(Scheduler::Difs, "random", 2.0);
    let mut w = World::new(&cfg).unwrap();
    let f = one_flow(&mut w, (0, 0, 0), (2, 1, 0), FlowSize::Bytes(total));
    let key = w.conns().get(f).key;
    let edge = w.topo().edge_switch(0, 0);
    let aggr = [
        w.topo().aggregate_switch(0, 0),
        w.topo().aggregate_switch(0, 1),
    ];
    let mut t = SimTime::ZERO;
    let mut commands = 0;
    while w.conns().get(f).completed_at.is_none() && t < SimTime::from_secs(2) {
        t = t + SimTime::from_millis(7);
        w.run_until(t);
        let up = commands % 2;
        if w.move_flow(edge, f, w.topo().port_towards(edge, aggr[up]).unwrap()) {
            commands += 1;
        }
        for a in aggr {
            let cores: Vec<usize> = w
                .topo()
                .ports(a)
                .iter()
                .enumerate()
                .filter(|(_, p)| !w.topo().is_host(p.peer) && w.topo().node(p.peer).pod().is_none())
                .map(|(i, _)| i)
                .collect();
            w.move_flow(a, f, cores[commands % cores.len()]);
        }
    }
    let e = w.conns().get(f);
    BounceResult {
        completed: e.completed_at.is_some(),
        commands,
        path_changes: w.path_changes(f),
        corrupt: e.receiver.corrupt_segments(),
        delivered: e.receiver.delivered(),
        total,
        digest_matches: e.receiver.stream_digest() == expected_digest(&key, total),
    }
}
