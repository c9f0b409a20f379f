//! JSON dump of a topology, for debugging and external tooling.
//!
//! Schema:
//!
//! ```json
//! { "k": 4,
//!   "nodes": [ { "id": 0, "name": "host[0.0.0]", "layer": "host",
//!                "pod": 0, "group": null, "edge": 0, "position": 0 }, ... ],
//!   "links": [ { "id": 0, "from": 0, "to": 16, "capacity_bps": 1000000000,
//!                "delay_ns": 10000 }, ... ] }
//! ```
//!
//! `pod` is null for cores, `group` is null for everything but cores, and
//! `edge` is only set for hosts.

use serde::Serialize;

use super::{Layer, Node, Topology};

#[derive(Debug, Serialize)]
pub struct TopologyDump {
    pub k: usize,
    pub nodes: Vec<NodeRecord>,
    pub links: Vec<LinkRecord>,
}

#[derive(Debug, Serialize)]
pub struct NodeRecord {
    pub id: u32,
    pub name: String,
    pub layer: Layer,
    pub pod: Option<u16>,
    pub group: Option<u16>,
    pub edge: Option<u16>,
    pub position: u16,
}

#[derive(Debug, Serialize)]
pub struct LinkRecord {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub capacity_bps: u64,
    pub delay_ns: u64,
}

impl From<&Topology> for TopologyDump {
    fn from(t: &Topology) -> Self {
        let nodes = t
            .nodes()
            .map(|(id, n)| {
                let (pod, group, edge, position) = match n {
                    Node::Host { pod, edge, pos } => (Some(pod), None, Some(edge), pos),
                    Node::Edge { pod, pos } | Node::Aggregate { pod, pos } => {
                        (Some(pod), None, None, pos)
                    }
                    Node::Core { group, pos } => (None, Some(group), None, pos),
                };
                NodeRecord {
                    id: id.0,
                    name: n.to_string(),
                    layer: n.layer(),
                    pod,
                    group,
                    edge,
                    position,
                }
            })
            .collect();
        let links = t
            .links()
            .map(|(id, l)| LinkRecord {
                id: id.0,
                from: l.from.0,
                to: l.to.0,
                capacity_bps: l.capacity_bps,
                delay_ns: l.delay.as_nanos(),
            })
            .collect();
        TopologyDump {
            k: t.k(),
            nodes,
            links,
        }
    }
}

impl Topology {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&TopologyDump::from(self))
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_fat_tree;

    #[test]
    fn dump_lists_every_node_and_link() {
        let t = build_fat_tree(4).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["k"], 4);
        assert_eq!(v["nodes"].as_array().unwrap().len(), 36);
        assert_eq!(v["links"].as_array().unwrap().len(), 96);
        assert_eq!(v["nodes"][0]["layer"], "host");
        assert_eq!(v["nodes"][35]["name"], "core[1.1]");
        assert_eq!(v["links"][0]["delay_ns"], 10_000);
    }
}
