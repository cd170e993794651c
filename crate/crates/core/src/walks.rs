//! Random-walk corpora over a [`Snapshot`].
//!
//! Two strategies are provided: second-order biased static walks (return
//! parameter `p`, in-out parameter `q`) and temporal walks whose traversed
//! event timestamps never decrease.
//!
//! Work is split into fixed-size chunks, each with its own generator derived
//! from `(seed, chunk index)`. The corpus is therefore identical whether the
//! chunks run on one thread or many.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IcmenError, Result};
use crate::graph::{NodeId, NodeRegistry, Snapshot};
use crate::rng::seeded;

const CHUNK: usize = 256;
const TEMPORAL_STREAM: u64 = 0x7E4D_0000_0000_0000;
const TEMPORAL_RETRY_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub min_length: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 80,
            min_length: 10,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node == 0 {
            return Err(IcmenError::InvalidArgument("walks_per_node must be >= 1".into()));
        }
        if self.min_length == 0 || self.walk_length < self.min_length {
            return Err(IcmenError::InvalidArgument(format!(
                "need walk_length ({}) >= min_length ({}) >= 1",
                self.walk_length, self.min_length
            )));
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(IcmenError::InvalidArgument(format!(
                "p ({}) and q ({}) must be positive",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

pub type Walk = Vec<NodeId>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WalkCorpus {
    walks: Vec<Walk>,
    /// Number of walks that were asked for.
    pub target: usize,
}

impl WalkCorpus {
    pub fn new(walks: Vec<Walk>, target: usize) -> Self {
        Self { walks, target }
    }

    pub fn walks(&self) -> &[Walk] {
        &self.walks
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// One walk per line, space-separated external node labels.
    pub fn write_text<W: Write>(&self, registry: &NodeRegistry, mut out: W) -> Result<()> {
        for walk in &self.walks {
            let line: Vec<String> = walk
                .iter()
                .map(|&n| {
                    registry
                        .label(n)
                        .map(|l| l.to_string())
                        .unwrap_or_else(|| format!("#{}", n.0))
                })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Unnormalized second-order transition weights out of `cur`, having arrived
/// from `prev`, aligned with `snapshot.neighbors(cur)`.
pub fn transition_weights(snapshot: &Snapshot, prev: u32, cur: u32, p: f64, q: f64) -> Vec<f64> {
    let prev_neighbors = snapshot.neighbors(prev);
    snapshot
        .neighbors(cur)
        .iter()
        .map(|&x| {
            if x == prev {
                1.0 / p
            } else if prev_neighbors.binary_search(&x).is_ok() {
                1.0
            } else {
                1.0 / q
            }
        })
        .collect()
}

fn static_walk(snapshot: &Snapshot, start: u32, cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> Walk {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let first = snapshot.neighbors(start);
    if first.is_empty() || cfg.walk_length < 2 {
        return vec![snapshot.node_at(start)];
    }
    walk.push(first[rng.gen_range(0..first.len())]);
    let mut weights = Vec::new();
    while walk.len() < cfg.walk_length {
        let cur = walk[walk.len() - 1];
        let prev = walk[walk.len() - 2];
        let candidates = snapshot.neighbors(cur);
        if candidates.is_empty() {
            break;
        }
        weights.clear();
        weights.extend(transition_weights(snapshot, prev, cur, cfg.p, cfg.q));
        walk.push(candidates[pick_weighted(rng, &weights)]);
    }
    walk.into_iter().map(|l| snapshot.node_at(l)).collect()
}

/// `walks_per_node` biased walks from every node of the snapshot.
pub fn generate_static_walks(snapshot: &Snapshot, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let n = snapshot.nodes().len();
    let total = n * cfg.walks_per_node;
    let chunks = total.div_ceil(CHUNK);
    let walks: Vec<Walk> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = seeded(cfg.seed, c as u64);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(total);
            (lo..hi)
                .map(|task| static_walk(snapshot, (task % n) as u32, cfg, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(WalkCorpus::new(walks, total))
}

fn temporal_walk(snapshot: &Snapshot, cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> Walk {
    let edges = snapshot.edges();
    let idx = rng.gen_range(0..edges.len());
    let e = edges[idx];
    let (mut from, mut to) = (e.src, e.dst);
    if !snapshot.is_directed() && rng.gen::<bool>() {
        std::mem::swap(&mut from, &mut to);
    }
    let mut walk = vec![from, to];
    let mut cur = snapshot.local_index(to).expect("edge endpoint in snapshot");
    let mut cur_edge = idx as u32;
    let mut cur_time = e.timestamp;

    while walk.len() < cfg.walk_length {
        let incidents = snapshot.incidents(cur);
        let start = incidents.partition_point(|i| i.timestamp < cur_time);
        let eligible = &incidents[start..];
        let own = eligible.iter().position(|i| i.edge == cur_edge);
        let count = eligible.len() - usize::from(own.is_some());
        if count == 0 {
            break;
        }
        let mut pick = rng.gen_range(0..count);
        if let Some(o) = own {
            if pick >= o {
                pick += 1;
            }
        }
        let next = eligible[pick];
        walk.push(snapshot.node_at(next.neighbor));
        cur = next.neighbor;
        cur_edge = next.edge;
        cur_time = next.timestamp;
    }
    walk
}

/// Temporal walks from uniformly sampled start events. Walks shorter than
/// `min_length` are discarded; sampling continues until `walks_per_node * |V|`
/// walks are kept or ten times that many attempts have been made.
pub fn generate_temporal_walks(snapshot: &Snapshot, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let target = snapshot.nodes().len() * cfg.walks_per_node;
    if snapshot.edges().is_empty() || target == 0 {
        return Ok(WalkCorpus::new(Vec::new(), target));
    }
    let budget = target * TEMPORAL_RETRY_FACTOR;
    let chunks = budget.div_ceil(CHUNK);
    let batch = (rayon::current_num_threads() * 2).max(1);

    let mut walks = Vec::with_capacity(target);
    let mut next_chunk = 0;
    while walks.len() < target && next_chunk < chunks {
        let hi = (next_chunk + batch).min(chunks);
        let found: Vec<Vec<Walk>> = (next_chunk..hi)
            .into_par_iter()
            .map(|c| {
                let mut rng = seeded(cfg.seed ^ TEMPORAL_STREAM, c as u64);
                let attempts = CHUNK.min(budget - c * CHUNK);
                (0..attempts)
                    .map(|_| temporal_walk(snapshot, cfg, &mut rng))
                    .filter(|w| w.len() >= cfg.min_length)
                    .collect()
            })
            .collect();
        for w in found.into_iter().flatten() {
            if walks.len() == target {
                break;
            }
            walks.push(w);
        }
        next_chunk = hi;
    }
    if walks.len() < target {
        log::warn!(
            "snapshot {}: only {} of {} temporal walks reached length {}",
            snapshot.period(),
            walks.len(),
            target,
            cfg.min_length
        );
    }
    Ok(WalkCorpus::new(walks, target))
}
