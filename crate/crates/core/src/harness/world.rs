//! The simulation engine: owns the topology, link queues, switches, TCP
//! endpoints and the event queue, and glues them together.

use rand::RngCore;
use serde::Serialize;

use crate::difs::{self, AdaptOutcome, ControlLoopConfig, Difs, Discard, EarMessage, Move};
use crate::error::{Error, Result};
use crate::fabric::{Fabric, MetricMode, Scheduler, SwitchState};
use crate::network::{LinkQueue, Packet};
use crate::sim::{mix64, EventQueue, RandomStream, SimTime, StreamId};
use crate::tcp::{Connections, FlowId, FlowKey, FlowSize};
use crate::topology::{build_fat_tree_with, LinkId, NodeId, Routing, Topology};
use crate::traffic::{FlowSpec, ShuffleJob, TrafficPattern};

use super::config::ExperimentConfig;
use super::validate::BalanceTracker;

/// RTT assumed for flow expiry until the first sample arrives.
const DEFAULT_RTT: SimTime = SimTime::from_millis(1);

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrive(LinkId),
    Start(FlowId),
    Rto(FlowId),
    Tick(u32),
    Ear(u32),
    Sample,
    Snapshot,
    Fail(LinkId),
}

impl Ev {
    fn tag(self) -> u64 {
        match self {
            Ev::Arrive(l) => u64::from(l.0) << 4,
            Ev::Start(f) => (u64::from(f.0) << 4) | 1,
            Ev::Rto(f) => (u64::from(f.0) << 4) | 2,
            Ev::Tick(s) => (u64::from(s) << 4) | 3,
            Ev::Ear(i) => (u64::from(i) << 4) | 4,
            Ev::Sample => 5,
            Ev::Snapshot => 6,
            Ev::Fail(l) => (u64::from(l.0) << 4) | 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EarFate {
    InFlight,
    Applied,
    AlreadyThere,
    NoEntry,
    SourceReached,
    LinkDown,
}

#[derive(Debug, Clone, Serialize)]
pub struct EarRecord {
    pub time: SimTime,
    pub origin: NodeId,
    pub flow: FlowKey,
    pub recommendation: NodeId,
    pub fate: EarFate,
    pub resolved_at: Option<SimTime>,
    /// Switches visited, starting with the origin.
    pub hops: Vec<NodeId>,
    /// Links traversed, each the reverse of the flow's incoming link at
    /// the switch it left.
    pub links: Vec<LinkId>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RunCounters {
    pub events: u64,
    pub queue_drops: u64,
    pub unroutable_drops: u64,
    pub ears: u64,
    pub moves_rebalance: u64,
    pub moves_ear: u64,
    pub moves_failure: u64,
    pub expired: u64,
    pub rtt_samples: u64,
    pub rtt_sum_ns: u128,
}

pub struct World {
    pub(crate) cfg: ExperimentConfig,
    control: ControlLoopConfig,
    topo: Topology,
    routing: Routing,
    link_up: Vec<bool>,
    queues: Vec<LinkQueue>,
    switches: Vec<SwitchState>,
    conns: Connections,
    flow_hash: Vec<u64>,
    timer_armed: Vec<Option<SimTime>>,
    last_path: Vec<u64>,
    path_changes: Vec<u64>,
    unreachable: Vec<FlowId>,
    events: EventQueue<Ev>,
    digest: u64,
    tiebreak: RandomStream,
    ear_pick: RandomStream,
    traffic_rng: RandomStream,
    shuffle: Option<ShuffleJob>,
    host_rx: Vec<u64>,
    rx_samples: Vec<Vec<u64>>,
    ears: Vec<EarRecord>,
    ear_msgs: Vec<Option<EarMessage>>,
    moves: Vec<(SimTime, Move)>,
    last_ear: Option<SimTime>,
    pub(crate) balance: BalanceTracker,
    counters: RunCounters,
    scratch: Vec<Packet>,
    end: SimTime,
    stopped_at: Option<SimTime>,
}

impl World {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let topo = build_fat_tree_with(cfg.k, cfg.link_params())?;
        let routing = Routing::all_up(&topo);
        let queues = topo
            .links()
            .map(|(id, l)| LinkQueue::for_link(id, l, cfg.queue_floor_packets))
            .collect();
        let salt = RandomStream::new(cfg.seed, StreamId::EcmpHashSalt).next_u64();
        let switches: Vec<SwitchState> = topo
            .switches()
            .map(|s| SwitchState::new(&topo, s, salt))
            .collect();
        let mut tiebreak = RandomStream::new(cfg.seed, StreamId::DifsTiebreak);
        let mut events = EventQueue::new();
        let control = cfg.control();
        if cfg.scheduler == Scheduler::Difs {
            let period = control.period.as_nanos();
            for i in 0..switches.len() {
                let phase = tiebreak.index(period as usize) as u64;
                events.schedule(SimTime::from_nanos(phase), Ev::Tick(i as u32));
            }
        }
        let dt = SimTime::from_secs_f64(cfg.sample_interval);
        events.schedule(dt, Ev::Sample);
        if cfg.scheduler == Scheduler::Difs {
            events.schedule(SimTime::from_secs_f64(cfg.snapshot_interval), Ev::Snapshot);
        }
        let num_hosts = topo.num_hosts();
        Ok(World {
            cfg: cfg.clone(),
            control,
            link_up: vec![true; topo.num_links()],
            routing,
            queues,
            switches,
            conns: Connections::new(cfg.tcp),
            flow_hash: Vec::new(),
            timer_armed: Vec::new(),
            last_path: Vec::new(),
            path_changes: Vec::new(),
            unreachable: Vec::new(),
            events,
            digest: 0,
            tiebreak,
            ear_pick: RandomStream::new(cfg.seed, StreamId::EarTargetPick),
            traffic_rng: RandomStream::new(cfg.seed, StreamId::TrafficGen),
            shuffle: None,
            host_rx: vec![0; num_hosts],
            rx_samples: vec![vec![0; num_hosts]],
            ears: Vec::new(),
            ear_msgs: Vec::new(),
            moves: Vec::new(),
            last_ear: None,
            balance: BalanceTracker::default(),
            counters: RunCounters::default(),
            scratch: Vec::new(),
            end: SimTime::from_secs_f64(cfg.duration),
            stopped_at: None,
            topo,
        })
    }

    /// Generate the configured traffic pattern and schedule its flows.
    pub fn install_pattern(&mut self) -> Result<()> {
        match self.cfg.pattern {
            TrafficPattern::Shuffle { bytes } => {
                let mut job = ShuffleJob::new(&self.topo, bytes, &mut self.traffic_rng);
                let first = job.first_transfers();
                self.shuffle = Some(job);
                for spec in first {
                    self.add_flow(spec)?;
                }
            }
            p => {
                for spec in p.generate(&self.topo, &mut self.traffic_rng)? {
                    self.add_flow(spec)?;
                }
            }
        }
        Ok(())
    }

    pub fn add_flow(&mut self, spec: FlowSpec) -> Result<FlowId> {
        let now = self.events.now();
        for h in [spec.key.src_host, spec.key.dst_host] {
            if h.index() >= self.topo.num_hosts() {
                return Err(Error::config("flow", format!("{h:?} is not a host")));
            }
        }
        let id = self.conns.open_flow(spec.key, spec.size, spec.start, now)?;
        self.flow_hash.push(spec.key.hash64());
        self.timer_armed.push(None);
        self.last_path.push(0);
        self.path_changes.push(0);
        self.events.schedule(spec.start, Ev::Start(id));
        Ok(id)
    }

    /// Force the first allocation of `flow` at each switch along `path`
    /// (a host-to-host link sequence).
    pub fn pin_path(&mut self, flow: FlowId, path: &[LinkId]) {
        for &l in path {
            let link = self.topo.link(l);
            if !self.topo.is_host(link.from) {
                let i = self.topo.switch_index(link.from);
                self.switches[i].pin(flow, link.from_port as usize);
            }
        }
    }

    /// Re-point `flow` at `switch` to leave through `port`, as a path
    /// change command would.
    pub fn move_flow(&mut self, switch: NodeId, flow: FlowId, port: usize) -> bool {
        let i = self.topo.switch_index(switch);
        if self.switches[i].entry(flow).is_none() {
            return false;
        }
        self.switches[i].move_flow(&self.topo, flow, port);
        true
    }

    /// Take the cable between two adjacent nodes down at `at`.
    pub fn schedule_link_failure(&mut self, at: SimTime, a: NodeId, b: NodeId) -> Result<()> {
        let l = self
            .topo
            .link_between(a, b)
            .ok_or_else(|| Error::config("failure", "nodes are not adjacent"))?;
        self.events.schedule(at, Ev::Fail(l));
        Ok(())
    }

    pub fn topo(&self) -> &Topology {
        &self.topo
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    pub fn switches(&self) -> &[SwitchState] {
        &self.switches
    }

    pub fn switch(&self, node: NodeId) -> &SwitchState {
        &self.switches[self.topo.switch_index(node)]
    }

    pub fn conns(&self) -> &Connections {
        &self.conns
    }

    pub fn queues(&self) -> &[LinkQueue] {
        &self.queues
    }

    pub fn now(&self) -> SimTime {
        self.events.now()
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn ears(&self) -> &[EarRecord] {
        &self.ears
    }

    pub fn moves(&self) -> &[(SimTime, Move)] {
        &self.moves
    }

    pub fn counters(&self) -> &RunCounters {
        &self.counters
    }

    pub fn shuffle(&self) -> Option<&ShuffleJob> {
        self.shuffle.as_ref()
    }

    pub fn unreachable_flows(&self) -> &[FlowId] {
        &self.unreachable
    }

    pub fn path_changes(&self, flow: FlowId) -> u64 {
        self.path_changes[flow.index()]
    }

    pub fn host_rx(&self) -> &[u64] {
        &self.host_rx
    }

    /// Cumulative per-host received bytes at each sampling instant
    /// (index 0 is t = 0).
    pub fn rx_samples(&self) -> &[Vec<u64>] {
        &self.rx_samples
    }

    pub fn stopped_at(&self) -> Option<SimTime> {
        self.stopped_at
    }

    /// Digest over every dispatched event and its kind.
    pub fn trace_digest(&self) -> u64 {
        mix64(self.digest ^ self.events.trace_digest())
    }

    pub fn avg_rtt(&self) -> SimTime {
        match self.counters.rtt_samples {
            0 => DEFAULT_RTT,
            n => SimTime::from_nanos((self.counters.rtt_sum_ns / u128::from(n)) as u64),
        }
    }

    pub fn expiry_threshold(&self) -> SimTime {
        SimTime::from_secs_f64(self.avg_rtt().as_secs_f64() * self.cfg.expiry_rtts)
    }

    /// Run until simulated time `t` (or until a shuffle completes).
    pub fn run_until(&mut self, t: SimTime) {
        let t = t.min(self.end);
        while self.stopped_at.is_none() {
            let Some((at, ev)) = self.events.pop_due(t) else {
                break;
            };
            self.digest = mix64(self.digest ^ ev.tag()).wrapping_add(at.as_nanos());
            self.counters.events += 1;
            self.dispatch(ev);
        }
        if self.stopped_at.is_none() {
            self.events.advance_to(t);
        }
    }

    pub fn run(&mut self) {
        self.run_until(self.end);
    }

    fn dispatch(&mut self, ev: Ev) {
        match ev {
            Ev::Arrive(l) => self.on_arrive(l),
            Ev::Start(f) => self.on_start(f),
            Ev::Rto(f) => self.on_rto(f),
            Ev::Tick(i) => self.on_tick(i as usize),
            Ev::Ear(i) => self.on_ear(i as usize),
            Ev::Sample => self.on_sample(),
            Ev::Snapshot => self.on_snapshot(),
            Ev::Fail(l) => self.on_fail(l),
        }
    }

    fn send(&mut self, link: LinkId, mut pkt: Packet) {
        pkt.path_digest = mix64(pkt.path_digest ^ u64::from(link.0));
        let now = self.events.now();
        match self.queues[link.index()].enqueue(pkt, now) {
            crate::network::Enqueued::Accepted {
                arrive,
                first_in_line: true,
            } => {
                self.events.schedule(arrive, Ev::Arrive(link));
            }
            crate::network::Enqueued::Accepted { .. } => {}
            crate::network::Enqueued::Dropped => self.counters.queue_drops += 1,
        }
    }

    fn host_send(&mut self, host: NodeId) {
        let link = self.topo.ports(host)[0].out_link;
        let pkts = std::mem::take(&mut self.scratch);
        for p in &pkts {
            self.send(link, *p);
        }
        self.scratch = pkts;
        self.scratch.clear();
    }

    fn arm_timer(&mut self, f: FlowId) {
        let Some(d) = self.conns.get(f).sender.timer_deadline() else {
            return;
        };
        match self.timer_armed[f.index()] {
            Some(a) if a <= d => {}
            _ => {
                self.timer_armed[f.index()] = Some(d);
                self.events.schedule(d, Ev::Rto(f));
            }
        }
    }

    fn on_start(&mut self, f: FlowId) {
        let now = self.events.now();
        let src = self.conns.get(f).key.src_host;
        self.scratch.clear();
        self.conns.get_mut(f).sender.start(now, &mut self.scratch);
        self.host_send(src);
        self.arm_timer(f);
    }

    fn on_rto(&mut self, f: FlowId) {
        let now = self.events.now();
        if self.timer_armed[f.index()] == Some(now) {
            self.timer_armed[f.index()] = None;
        }
        self.scratch.clear();
        let src = self.conns.get(f).key.src_host;
        if self
            .conns
            .get_mut(f)
            .sender
            .on_timer(now, &mut self.scratch)
        {
            self.host_send(src);
        }
        self.arm_timer(f);
    }

    fn on_arrive(&mut self, l: LinkId) {
        let now = self.events.now();
        let q = &mut self.queues[l.index()];
        let Some(pkt) = q.deliver(now) else { return };
        if let Some(next) = q.next_arrival() {
            self.events.schedule(next, Ev::Arrive(l));
        }
        let link = self.topo.link(l);
        let (node, in_port) = (link.to, link.to_port as usize);
        if self.topo.is_host(node) {
            self.host_receive(node, pkt);
        } else {
            self.switch_forward(node, in_port, pkt);
        }
    }

    fn host_receive(&mut self, host: NodeId, pkt: Packet) {
        let now = self.events.now();
        let f = pkt.flow;
        if pkt.is_reverse() {
            self.scratch.clear();
            let outcome = self
                .conns
                .get_mut(f)
                .sender
                .on_ack(&pkt, now, &mut self.scratch);
            self.host_send(host);
            if let Some(s) = outcome.rtt_sample {
                self.counters.rtt_samples += 1;
                self.counters.rtt_sum_ns += u128::from(s.as_nanos());
            }
            if outcome.completed {
                self.on_complete(f);
            } else {
                self.arm_timer(f);
            }
        } else {
            if pkt.payload_len > 0 {
                let fi = f.index();
                if self.last_path[fi] != pkt.path_digest {
                    if self.last_path[fi] != 0 {
                        self.path_changes[fi] += 1;
                    }
                    self.last_path[fi] = pkt.path_digest;
                }
            }
            let (ack, delivered) = self.conns.get_mut(f).receiver.on_receive(&pkt);
            self.host_rx[host.index()] += delivered;
            let link = self.topo.ports(host)[0].out_link;
            self.send(link, ack);
        }
    }

    fn on_complete(&mut self, f: FlowId) {
        let now = self.events.now();
        let entry = self.conns.get_mut(f);
        entry.completed_at = Some(now);
        let receiver = entry.key.dst_host;
        let Some(job) = self.shuffle.as_mut() else {
            return;
        };
        match job.next_shuffle_transfer(receiver, now) {
            Some(spec) => {
                self.add_flow(spec).expect("shuffle keys are unique");
            }
            None => {
                if job.done() && self.cfg.stop_when_done {
                    self.stopped_at = Some(now);
                }
            }
        }
    }

    fn switch_forward(&mut self, node: NodeId, in_port: usize, mut pkt: Packet) {
        let now = self.events.now();
        let si = self.topo.switch_index(node);
        let entry = self.conns.get(pkt.flow);
        let key = entry.key;
        let hash = self.flow_hash[pkt.flow.index()];
        let mut fabric = Fabric {
            topo: &self.topo,
            routing: &self.routing,
            scheduler: self.cfg.scheduler,
            mode: self.cfg.metric_mode,
            elephant_threshold: self.cfg.elephant_threshold,
            rng: &mut self.tiebreak,
        };
        match fabric.forward(&mut self.switches[si], &mut pkt, in_port, &key, hash, now) {
            Some(port) => {
                let link = self.topo.ports(node)[port].out_link;
                self.send(link, pkt);
            }
            None => self.counters.unroutable_drops += 1,
        }
    }

    fn difs(&mut self) -> (Difs<'_>, &mut Vec<SwitchState>) {
        (
            Difs {
                topo: &self.topo,
                routing: &self.routing,
                cfg: &self.control,
                tiebreak: &mut self.tiebreak,
                ear_pick: &mut self.ear_pick,
            },
            &mut self.switches,
        )
    }

    fn on_tick(&mut self, si: usize) {
        let now = self.events.now();
        let expiry = self.expiry_threshold();
        let mode = self.cfg.metric_mode;
        let expired = self.switches[si].expire_flows(now, expiry).len();
        self.counters.expired += expired as u64;
        if mode == MetricMode::MeasuredRate {
            self.switches[si].update_rates(now);
        }
        let (mut difs, switches) = self.difs();
        let sw = &mut switches[si];
        let moves = difs.rebalance_simo(sw);
        let ear = difs.imbalance_detect(sw);
        if cfg!(debug_assertions) {
            if let Err(e) = sw.check_psv() {
                panic!("PSV inconsistency at {:?}: {e}", sw.node());
            }
        }
        self.counters.moves_rebalance += moves.len() as u64;
        self.moves.extend(moves.into_iter().map(|m| (now, m)));
        if let Some(ear) = ear {
            let port = self.switches[si]
                .entry(ear.flow)
                .expect("EAR for known flow")
                .in_port;
            self.emit_ear(si, port as usize, ear);
        }
        self.events
            .schedule(now + self.control.period, Ev::Tick(si as u32));
    }

    fn emit_ear(&mut self, si: usize, port: usize, ear: EarMessage) {
        let now = self.events.now();
        self.switches[si].counters.ears_sent += 1;
        self.counters.ears += 1;
        self.last_ear = Some(now);
        let idx = self.ears.len();
        self.ears.push(EarRecord {
            time: now,
            origin: ear.origin,
            flow: ear.key,
            recommendation: ear.recommendation.target(),
            fate: EarFate::InFlight,
            resolved_at: None,
            hops: vec![ear.origin],
            links: Vec::new(),
        });
        self.ear_msgs.push(Some(ear));
        self.forward_ear(idx, self.switches[si].node(), port);
    }

    /// Send an EAR one hop toward the flow's source. EARs are control
    /// messages: they take one propagation delay and are never queued
    /// behind data.
    fn forward_ear(&mut self, idx: usize, from: NodeId, port: usize) {
        let now = self.events.now();
        let link = self.topo.ports(from)[port].out_link;
        if !self.link_up[link.index()] {
            self.resolve_ear(idx, EarFate::LinkDown);
            return;
        }
        self.ears[idx].links.push(link);
        let at = now + self.topo.link(link).delay;
        self.events.schedule(at, Ev::Ear(idx as u32));
    }

    fn resolve_ear(&mut self, idx: usize, fate: EarFate) {
        self.ears[idx].fate = fate;
        self.ears[idx].resolved_at = Some(self.events.now());
        self.ear_msgs[idx] = None;
    }

    fn on_ear(&mut self, idx: usize) {
        let now = self.events.now();
        let link = *self.ears[idx].links.last().expect("EAR in flight");
        let node = self.topo.link(link).to;
        let mut ear = self.ear_msgs[idx].take().expect("EAR in flight");
        ear.hop_trace.push(node);
        self.ears[idx].hops.push(node);
        let si = self.topo.switch_index(node);
        let (mut difs, switches) = self.difs();
        let outcome = difs.explicit_adapt(&mut switches[si], &ear);
        let sw = &mut self.switches[si];
        match outcome {
            AdaptOutcome::Applied { moves } => {
                sw.counters.ears_applied += 1;
                self.counters.moves_ear += moves.len() as u64;
                self.moves.extend(moves.into_iter().map(|m| (now, m)));
                self.resolve_ear(idx, EarFate::Applied);
            }
            AdaptOutcome::AlreadyThere => {
                sw.counters.ears_applied += 1;
                self.resolve_ear(idx, EarFate::AlreadyThere);
            }
            AdaptOutcome::Forward { port } => {
                sw.counters.ears_forwarded += 1;
                self.ear_msgs[idx] = Some(ear);
                self.forward_ear(idx, node, port);
            }
            AdaptOutcome::Discarded(why) => {
                sw.counters.ears_discarded += 1;
                let fate = match why {
                    Discard::NoEntry => EarFate::NoEntry,
                    Discard::SourceReached => EarFate::SourceReached,
                };
                self.resolve_ear(idx, fate);
            }
        }
    }

    fn on_sample(&mut self) {
        self.rx_samples.push(self.host_rx.clone());
        let dt = SimTime::from_secs_f64(self.cfg.sample_interval);
        let next = SimTime::from_secs_f64(self.cfg.sample_interval * self.rx_samples.len() as f64);
        debug_assert!(next >= self.events.now() + dt - SimTime::from_nanos(1));
        self.events.schedule(next, Ev::Sample);
    }

    /// Whether no EAR has been emitted anywhere for the configured number
    /// of control periods.
    pub fn is_steady(&self) -> bool {
        let quiet = self.control.period.mul(u64::from(self.cfg.steady_ticks));
        let since = self.last_ear.unwrap_or(SimTime::ZERO);
        self.events.now().saturating_sub(since) >= quiet
    }

    fn on_snapshot(&mut self) {
        let now = self.events.now();
        if self.cfg.metric_mode == MetricMode::Count && self.is_steady() {
            let margins = difs::bo_bi_margins(
                &self.topo,
                &self.switches,
                self.control.delta,
                now,
                self.expiry_threshold(),
            );
            let mut balance = std::mem::take(&mut self.balance);
            balance.record(now, &margins, || super::output::switch_dump(self));
            self.balance = balance;
        }
        self.events.schedule(
            now + SimTime::from_secs_f64(self.cfg.snapshot_interval),
            Ev::Snapshot,
        );
    }

    fn on_fail(&mut self, l: LinkId) {
        let rev = self.topo.link(l).reverse;
        for d in [l, rev] {
            self.link_up[d.index()] = false;
            let lost = self.queues[d.index()].fail();
            self.counters.queue_drops += lost.len() as u64;
        }
        self.routing = Routing::new(&self.topo, &self.link_up);
        if self.cfg.scheduler != Scheduler::Difs {
            self.collect_unreachable();
            return;
        }
        let now = self.events.now();
        for d in [l, rev] {
            let link = self.topo.link(d);
            if self.topo.is_host(link.from) {
                continue;
            }
            let si = self.topo.switch_index(link.from);
            let port = link.from_port as usize;
            let (mut difs, switches) = self.difs();
            let out = difs.on_link_failure(&mut switches[si], port);
            self.counters.moves_failure += out.moves.len() as u64;
            self.moves.extend(out.moves.into_iter().map(|m| (now, m)));
            for f in out.unreachable {
                if !self.unreachable.contains(&f) {
                    self.unreachable.push(f);
                }
            }
            for (port, ear) in out.ears {
                self.emit_ear(si, port, ear);
            }
        }
        self.collect_unreachable();
    }

    fn collect_unreachable(&mut self) {
        for e in self.conns.iter() {
            let f = e.sender.flow();
            if !e.sender.is_complete()
                && !self
                    .routing
                    .reachable(&self.topo, e.key.src_host, e.key.dst_host)
                && !self.unreachable.contains(&f)
            {
                self.unreachable.push(f);
            }
        }
    }

    /// Links currently taken by data of `f`, following installed flow
    /// entries from the source host. `None` while any hop has no entry.
    pub fn flow_path(&self, f: FlowId) -> Option<Vec<LinkId>> {
        let key = self.conns.get(f).key;
        let mut link = self.topo.ports(key.src_host)[0].out_link;
        let mut path = vec![link];
        loop {
            let node = self.topo.link(link).to;
            if node == key.dst_host {
                return Some(path);
            }
            if self.topo.is_host(node) || path.len() > 6 {
                return None;
            }
            let e = self.switch(node).entry(f)?;
            link = self.topo.ports(node)[e.out_port as usize].out_link;
            path.push(link);
        }
    }

    pub fn size_of(&self, f: FlowId) -> FlowSize {
        self.conns.get(f).size
    }
}
