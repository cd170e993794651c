//! Synthetic temporal graphs for tests, benchmarks and smoke runs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, NodeRegistry, TemporalEdge, TemporalEdgeList};
use crate::rng;

/// A generated graph; node labels equal node ids.
#[derive(Debug, Clone)]
pub struct SyntheticGraph {
    pub registry: NodeRegistry,
    pub edges: TemporalEdgeList,
    /// Distinct node pairs the events were drawn from.
    pub pairs: Vec<(NodeId, NodeId)>,
}

fn registry(nodes: usize) -> NodeRegistry {
    let mut reg = NodeRegistry::new();
    for i in 0..nodes {
        reg.get_or_insert(i as u64);
    }
    reg
}

/// Draws `events` events uniformly from `pairs` with uniform timestamps in
/// `[0, 1000)`, sorted by time.
fn events_from_pairs<R: Rng>(pairs: &[(NodeId, NodeId)], events: usize, rng: &mut R) -> Vec<TemporalEdge> {
    let mut edges: Vec<TemporalEdge> = Vec::with_capacity(events.max(pairs.len()));
    // every pair occurs at least once so the pair set is exactly `pairs`
    for &(u, v) in pairs.iter().take(events) {
        edges.push(TemporalEdge::new(u, v, rng.gen_range(0.0..1000.0)));
    }
    while edges.len() < events {
        let (u, v) = pairs[rng.gen_range(0..pairs.len())];
        edges.push(TemporalEdge::new(u, v, rng.gen_range(0.0..1000.0)));
    }
    edges.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    edges
}

/// Two cliques of `size` nodes (ids `0..size` and `size..2*size`) joined by a
/// single bridge between node `size - 1` and node `size`. Each clique edge
/// recurs `events_per_pair` times on average.
pub fn two_cliques(size: usize, events_per_pair: usize, seed: u64) -> SyntheticGraph {
    assert!(size >= 2, "cliques need at least two nodes");
    let mut pairs = Vec::new();
    for block in 0..2 {
        let base = block * size;
        for i in 0..size {
            for j in i + 1..size {
                pairs.push((NodeId((base + i) as u32), NodeId((base + j) as u32)));
            }
        }
    }
    pairs.push((NodeId(size as u32 - 1), NodeId(size as u32)));
    let mut rng = rng::seeded(seed, 0);
    pairs.shuffle(&mut rng);
    let edges = events_from_pairs(&pairs, pairs.len() * events_per_pair.max(1), &mut rng);
    SyntheticGraph {
        registry: registry(2 * size),
        edges: TemporalEdgeList::new(edges, false),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub nodes: usize,
    pub communities: usize,
    /// Probability that a pair inside a community is linked.
    pub p_in: f64,
    /// Probability that a pair across communities is linked.
    pub p_out: f64,
    pub events: usize,
    pub directed: bool,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            nodes: 100,
            communities: 4,
            p_in: 0.3,
            p_out: 0.01,
            events: 5000,
            directed: false,
            seed: 0,
        }
    }
}

/// Stochastic block model pair set with events drawn uniformly from it. The
/// pair set depends only on `(nodes, communities, p_in, p_out, seed)`, so the
/// event count can vary while the graph stays fixed.
pub fn temporal_sbm(cfg: &SbmConfig) -> SyntheticGraph {
    let communities = cfg.communities.max(1);
    let block = |i: usize| i * communities / cfg.nodes.max(1);
    let mut rng = rng::seeded(cfg.seed, 0);
    let mut pairs = Vec::new();
    for i in 0..cfg.nodes {
        let others: Box<dyn Iterator<Item = usize>> = if cfg.directed {
            Box::new((0..cfg.nodes).filter(move |&j| j != i))
        } else {
            Box::new(i + 1..cfg.nodes)
        };
        for j in others {
            let p = if block(i) == block(j) { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                pairs.push((NodeId(i as u32), NodeId(j as u32)));
            }
        }
    }
    if pairs.is_empty() && cfg.nodes >= 2 {
        pairs.push((NodeId(0), NodeId(1)));
    }
    pairs.shuffle(&mut rng);
    let mut event_rng = rng::seeded(cfg.seed, 1);
    let edges = events_from_pairs(&pairs, cfg.events, &mut event_rng);
    SyntheticGraph {
        registry: registry(cfg.nodes),
        edges: TemporalEdgeList::new(edges, cfg.directed),
        pairs,
    }
}

/// Writes `src dst timestamp` lines using the registry labels.
pub fn write_edge_list<W: std::io::Write>(graph: &SyntheticGraph, mut out: W) -> crate::error::Result<()> {
    for e in graph.edges.edges() {
        let s = graph.registry.label(e.src).expect("registered");
        let d = graph.registry.label(e.dst).expect("registered");
        writeln!(out, "{s} {d} {}", e.timestamp)?;
    }
    Ok(())
}
