//! Scripted two-flow collisions on a k=4 fat-tree and their resolution.
//!
//! Node naming below is zero based: `edge(p,e)`, `aggr(p,a)` and
//! `core(g,c)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::SimTime;
use crate::tcp::{FlowId, FlowKey, FlowSize};
use crate::topology::{LinkId, NodeId};
use crate::traffic::{FlowSpec, TrafficPattern};

use super::config::ExperimentConfig;
use super::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    /// Two flows leaving one edge switch toward different pods.
    Local,
    /// Two flows from different pods meeting on the same core link into
    /// one aggregate.
    Remote1,
    /// Two flows meeting on one aggregate-to-edge downlink.
    Remote2,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 3] = [
        ScenarioName::Local,
        ScenarioName::Remote1,
        ScenarioName::Remote2,
    ];
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Local => "local",
            ScenarioName::Remote1 => "remote1",
            ScenarioName::Remote2 => "remote2",
        })
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(ScenarioName::Local),
            "remote1" => Ok(ScenarioName::Remote1),
            "remote2" => Ok(ScenarioName::Remote2),
            _ => Err(Error::config("scenario", format!("unknown scenario {s:?}"))),
        }
    }
}

/// Observation window for goodput, after the collision has been handled.
const GOODPUT_FROM: SimTime = SimTime::from_millis(200);
const GOODPUT_TO: SimTime = SimTime::from_millis(500);
const STEP: SimTime = SimTime::from_millis(1);
const MAX_TICKS: u64 = 10;
const MIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: ScenarioName,
    /// Whether both flows were first installed on a shared link.
    pub collided: bool,
    /// When both flows had a complete installed path.
    pub installed_at: Option<f64>,
    pub disjoint_at: Option<f64>,
    pub ticks_to_resolve: Option<u64>,
    pub disjoint_at_end: bool,
    /// Goodput of each flow as a fraction of the link rate.
    pub goodput_fraction: [f64; 2],
    /// `time origin -> recommendation (fate)` for each EAR.
    pub ears: Vec<String>,
    pub passed: bool,
}

struct Script {
    flows: [(NodeId, NodeId); 2],
    /// Switch sequences whose first allocations are forced, per flow.
    pins: [Vec<NodeId>; 2],
}

fn script(w: &World, name: ScenarioName) -> Script {
    let t = w.topo();
    match name {
        ScenarioName::Local => Script {
            flows: [
                (t.host_at(0, 0, 0), t.host_at(1, 0, 0)),
                (t.host_at(0, 0, 1), t.host_at(2, 0, 0)),
            ],
            pins: [vec![], vec![]],
        },
        ScenarioName::Remote1 => {
            let dst = [t.host_at(1, 0, 0), t.host_at(1, 1, 0)];
            let mk = |pod: usize, i: usize| {
                vec![
                    t.edge_switch(pod, 0),
                    t.aggregate_switch(pod, 0),
                    t.core_switch(0, 1),
                    t.aggregate_switch(1, 0),
                    t.edge_switch(1, i),
                ]
            };
            Script {
                flows: [(t.host_at(2, 0, 0), dst[0]), (t.host_at(3, 0, 0), dst[1])],
                pins: [mk(2, 0), mk(3, 1)],
            }
        }
        ScenarioName::Remote2 => {
            let mk = |pod: usize, core: usize| {
                vec![
                    t.edge_switch(pod, 0),
                    t.aggregate_switch(pod, 1),
                    t.core_switch(1, core),
                    t.aggregate_switch(1, 1),
                    t.edge_switch(1, 0),
                ]
            };
            Script {
                flows: [
                    (t.host_at(0, 0, 0), t.host_at(1, 0, 0)),
                    (t.host_at(2, 0, 0), t.host_at(1, 0, 1)),
                ],
                pins: [mk(0, 0), mk(2, 1)],
            }
        }
    }
}

pub fn scenario_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        k: 4,
        duration: GOODPUT_TO.as_secs_f64(),
        warmup: Some(GOODPUT_FROM.as_secs_f64()),
        cooldown: Some(0.0),
        seed,
        sample_interval: 0.01,
        snapshot_interval: 0.01,
        ..Default::default()
    }
}

fn shares_link(a: &[LinkId], b: &[LinkId]) -> bool {
    a.iter().any(|l| b.contains(l))
}

/// Run one scripted collision and check that it is resolved within ten
/// control ticks with both flows near line rate afterwards.
pub fn scenario_check(name: ScenarioName, base: &ExperimentConfig) -> Result<ScenarioReport> {
    let cfg = ExperimentConfig {
        pattern: TrafficPattern::Random,
        ..base.clone()
    };
    let mut w = World::new(&cfg)?;
    let s = script(&w, name);
    let mut ids: Vec<FlowId> = Vec::new();
    for (i, &(src, dst)) in s.flows.iter().enumerate() {
        let id = w.add_flow(FlowSpec {
            key: FlowKey::new(src, dst, 0),
            size: FlowSize::Permanent,
            start: SimTime::ZERO,
        })?;
        if !s.pins[i].is_empty() {
            let route: Vec<LinkId> = std::iter::once(src)
                .chain(s.pins[i].iter().copied())
                .chain(std::iter::once(dst))
                .collect::<Vec<_>>()
                .windows(2)
                .map(|p| {
                    w.topo()
                        .link_between(p[0], p[1])
                        .expect("scripted route is adjacent")
                })
                .collect();
            w.pin_path(id, &route);
        }
        ids.push(id);
    }

    let mut installed_at = None;
    let mut collided = false;
    let mut disjoint_at = None;
    while w.now() < GOODPUT_FROM {
        w.run_until(w.now() + STEP);
        let (Some(a), Some(b)) = (w.flow_path(ids[0]), w.flow_path(ids[1])) else {
            continue;
        };
        let shared = shares_link(&a, &b);
        if installed_at.is_none() {
            installed_at = Some(w.now());
            collided = shared;
        }
        match (shared, disjoint_at) {
            (false, None) => disjoint_at = Some(w.now()),
            (true, Some(_)) => disjoint_at = None,
            _ => {}
        }
    }
    let before: Vec<u64> = ids
        .iter()
        .map(|&f| w.conns().get(f).receiver.delivered())
        .collect();
    w.run_until(GOODPUT_TO);
    let span = (GOODPUT_TO - GOODPUT_FROM).as_secs_f64();
    let cap = cfg.link_capacity_bps as f64;
    let mut goodput_fraction = [0.0; 2];
    for (i, &f) in ids.iter().enumerate() {
        let got = w.conns().get(f).receiver.delivered() - before[i];
        goodput_fraction[i] = got as f64 * 8.0 / span / cap;
    }
    let disjoint_at_end = match (w.flow_path(ids[0]), w.flow_path(ids[1])) {
        (Some(a), Some(b)) => !shares_link(&a, &b),
        _ => false,
    };
    let period = cfg.control().period;
    let ticks_to_resolve = match (installed_at, disjoint_at) {
        (Some(i), Some(d)) => Some((d - i).as_nanos().div_ceil(period.as_nanos())),
        _ => None,
    };
    let topo = w.topo();
    let ears = w
        .ears()
        .iter()
        .map(|r| {
            format!(
                "{:.4} {} -> {} ({:?})",
                r.time.as_secs_f64(),
                topo.node(r.origin),
                topo.node(r.recommendation),
                r.fate
            )
        })
        .collect();
    let passed = disjoint_at_end
        && ticks_to_resolve.is_some_and(|t| t <= MAX_TICKS)
        && goodput_fraction.iter().all(|&g| g >= MIN_FRACTION)
        && (name == ScenarioName::Local || collided);
    Ok(ScenarioReport {
        name,
        collided,
        installed_at: installed_at.map(SimTime::as_secs_f64),
        disjoint_at: disjoint_at.map(SimTime::as_secs_f64),
        ticks_to_resolve,
        disjoint_at_end,
        goodput_fraction,
        ears,
        passed,
    })
}
