//! Skip-gram with negative sampling over walk corpora.
//!
//! For a (center, context) pair the objective is
//! `log σ(c·v) + Σ_{n ~ table} log σ(-n·v)`, maximized by SGD with a learning
//! rate that decays linearly to a floor.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, NodeVectors};
use crate::error::{IcmenError, Result};
use crate::graph::NodeId;
use crate::rng::{derive_seed, seeded};
use crate::walks::WalkCorpus;

pub const DEFAULT_NEGATIVE_EXPONENT: f64 = 0.75;
const LR_FLOOR_RATIO: f64 = 1e-4;
const MAX_NEGATIVE_REDRAWS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 10,
            negatives: 5,
            epochs: 1,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 {
            return Err(IcmenError::InvalidArgument(
                "dim, window and negatives must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(IcmenError::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    /// Single thread, bit-reproducible for a fixed seed.
    #[default]
    Deterministic,
    /// Lock-free updates from several workers; lost updates are tolerated.
    Parallel { workers: usize },
}

/// Negative-sampling distribution: `count^exponent`.
#[derive(Debug, Clone)]
pub struct UnigramTable {
    nodes: Vec<NodeId>,
    counts: Vec<u64>,
    augmented: Vec<NodeId>,
    exponent: f64,
    sampler: WeightedIndex<f64>,
}

impl UnigramTable {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn count(&self, node: NodeId) -> u64 {
        self.nodes
            .iter()
            .position(|&n| n == node)
            .map_or(0, |i| self.counts[i])
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Reference nodes that were added with a synthetic count.
    pub fn augmented(&self) -> &[NodeId] {
        &self.augmented
    }

    /// Sampling probability of `node`.
    pub fn probability(&self, node: NodeId) -> f64 {
        let w = |c: u64| (c as f64).powf(self.exponent);
        let total: f64 = self.counts.iter().map(|&c| w(c)).sum();
        w(self.count(node)) / total
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> NodeId {
        self.nodes[self.sampler.sample(rng)]
    }
}

/// Corpus occurrence counts, plus `walks_per_node` occurrences for every
/// disconnected reference node.
pub fn build_unigram_table(
    corpus: &WalkCorpus,
    disconnected_refs: &[NodeId],
    walks_per_node: usize,
    exponent: f64,
) -> Result<UnigramTable> {
    let mut counts: std::collections::BTreeMap<NodeId, u64> = std::collections::BTreeMap::new();
    for walk in corpus.walks() {
        for &n in walk {
            *counts.entry(n).or_default() += 1;
        }
    }
    let mut augmented = Vec::new();
    for &r in disconnected_refs {
        if let std::collections::btree_map::Entry::Vacant(e) = counts.entry(r) {
            e.insert(walks_per_node as u64);
            augmented.push(r);
        }
    }
    if counts.is_empty() {
        return Err(IcmenError::EmptySample(
            "unigram table needs a non-empty corpus or reference nodes".into(),
        ));
    }
    let (nodes, counts): (Vec<NodeId>, Vec<u64>) = counts.into_iter().unzip();
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
    let sampler = WeightedIndex::new(&weights)
        .map_err(|e| IcmenError::InvalidArgument(format!("unigram weights: {e}")))?;
    Ok(UnigramTable {
        nodes,
        counts,
        augmented,
        exponent,
        sampler,
    })
}

/// All ordered (center, context) pairs within `window` positions.
pub fn build_training_pairs(corpus: &WalkCorpus, window: usize) -> Vec<(NodeId, NodeId)> {
    let mut pairs = Vec::new();
    for walk in corpus.walks() {
        for (i, &center) in walk.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for (j, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                if j != i {
                    pairs.push((center, ctx));
                }
            }
        }
    }
    pairs
}

/// Copies the input vectors of `refs` from `previous`. Reference nodes without
/// a row get one (zero context). Context vectors are never copied.
pub fn warm_start_reference_nodes<P: NodeVectors>(
    mut matrix: EmbeddingMatrix,
    previous: &P,
    refs: &[NodeId],
) -> Result<EmbeddingMatrix> {
    if previous.dim() != matrix.dim() {
        return Err(IcmenError::DimensionMismatch {
            expected: matrix.dim(),
            actual: previous.dim(),
        });
    }
    for &r in refs {
        let row = previous.vector(r).ok_or(IcmenError::MissingNode(r))?;
        matrix.insert(r, row, None);
    }
    Ok(matrix)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SGNS log-likelihood of one pair with its negatives.
pub fn sgns_objective(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let pos = sigmoid(dot(context, center)).ln();
    let neg: f64 = negatives.iter().map(|n| sigmoid(-dot(n, center)).ln()).sum();
    pos + neg
}

/// Gradient of [`sgns_objective`] with respect to the center vector, the
/// context vector and each negative vector.
pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let g_pos = 1.0 - sigmoid(dot(context, center));
    let mut g_center: Vec<f64> = context.iter().map(|c| g_pos * c).collect();
    let g_context: Vec<f64> = center.iter().map(|v| g_pos * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = -sigmoid(dot(n, center));
        for (gc, nv) in g_center.iter_mut().zip(n.iter()) {
            *gc += g * nv;
        }
        g_negs.push(center.iter().map(|v| g * v).collect());
    }
    (g_center, g_context, g_negs)
}

struct Prepared {
    pairs: Vec<(u32, u32)>,
    table_rows: Vec<u32>,
}

fn prepare(
    pairs: &[(NodeId, NodeId)],
    matrix: &mut EmbeddingMatrix,
    table: &UnigramTable,
    seed: u64,
) -> Prepared {
    let ensure = |n: NodeId, m: &mut EmbeddingMatrix| -> u32 {
        if let Some(i) = m.row_index(n) {
            return i as u32;
        }
        let d = m.dim();
        let half = 0.5 / d as f64;
        let mut rng = seeded(seed, 0xA11C_0000 ^ n.0 as u64);
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-half..=half)).collect();
        m.insert(n, &row, None) as u32
    };
    let pairs = pairs
        .iter()
        .map(|&(v, c)| (ensure(v, matrix), ensure(c, matrix)))
        .collect();
    let table_rows = table.nodes().iter().map(|&n| ensure(n, matrix)).collect();
    Prepared { pairs, table_rows }
}

fn learning_rate(cfg: &TrainConfig, step: usize, total: usize) -> f64 {
    let progress = step as f64 / total.max(1) as f64;
    cfg.learning_rate * (1.0 - progress).max(LR_FLOOR_RATIO)
}

fn draw_negative(table: &UnigramTable, rows: &[u32], positive: u32, rng: &mut ChaCha8Rng) -> Option<u32> {
    for _ in 0..MAX_NEGATIVE_REDRAWS {
        let idx = table.sampler.sample(rng);
        if rows[idx] != positive {
            return Some(rows[idx]);
        }
    }
    None
}

/// Trains SGNS starting from `init`. Nodes seen in `pairs` or `table` without a
/// row get a fresh random row.
pub fn train_sgns(
    pairs: &[(NodeId, NodeId)],
    init: EmbeddingMatrix,
    table: &UnigramTable,
    cfg: &TrainConfig,
    mode: TrainMode,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let mut matrix = init;
    if cfg.epochs == 0 {
        return Ok(matrix);
    }
    let prepared = prepare(pairs, &mut matrix, table, cfg.seed);
    match mode {
        TrainMode::Deterministic => train_serial(&prepared, &mut matrix, table, cfg)?,
        TrainMode::Parallel { workers } if workers <= 1 => train_serial(&prepared, &mut matrix, table, cfg)?,
        TrainMode::Parallel { workers } => train_hogwild(&prepared, &mut matrix, table, cfg, workers)?,
    }
    if !matrix.is_finite() {
        return Err(IcmenError::NonFinite("skip-gram training".into()));
    }
    Ok(matrix)
}

fn train_serial(p: &Prepared, matrix: &mut EmbeddingMatrix, table: &UnigramTable, cfg: &TrainConfig) -> Result<()> {
    let d = matrix.dim();
    let (input, context) = matrix.buffers_mut();
    let total = p.pairs.len() * cfg.epochs;
    let mut grad = vec![0.0; d];
    let mut order: Vec<usize> = (0..p.pairs.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut rng = seeded(cfg.seed, 0x5E55_0000 + epoch as u64);
        order.shuffle(&mut rng);
        for &k in &order {
            let (v, c) = p.pairs[k];
            let lr = learning_rate(cfg, step, total);
            step += 1;
            let vrow = v as usize * d;
            grad.iter_mut().for_each(|g| *g = 0.0);
            for s in 0..=cfg.negatives {
                let (target, label) = if s == 0 {
                    (c, 1.0)
                } else {
                    match draw_negative(table, &p.table_rows, c, &mut rng) {
                        Some(t) => (t, 0.0),
                        None => continue,
                    }
                };
                let trow = target as usize * d;
                let f = dot(&input[vrow..vrow + d], &context[trow..trow + d]);
                let g = (label - sigmoid(f)) * lr;
                if !g.is_finite() {
                    return Err(IcmenError::NonFinite(format!("update of pair {k} in epoch {epoch}")));
                }
                for i in 0..d {
                    grad[i] += g * context[trow + i];
                    context[trow + i] += g * input[vrow + i];
                }
            }
            for i in 0..d {
                input[vrow + i] += grad[i];
            }
        }
    }
    Ok(())
}

struct AtomicBuf(Vec<AtomicU64>);

impl AtomicBuf {
    fn from(data: &[f64]) -> Self {
        Self(data.iter().map(|v| AtomicU64::new(v.to_bits())).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, i: usize, delta: f64) {
        // Plain load/store: a concurrent writer may overwrite this update, but
        // each element is always read and written whole.
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }

    fn copy_to(&self, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.0) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }
}

fn train_hogwild(
    p: &Prepared,
    matrix: &mut EmbeddingMatrix,
    table: &UnigramTable,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<()> {
    let d = matrix.dim();
    let (input_buf, context_buf) = matrix.buffers_mut();
    let input = AtomicBuf::from(input_buf);
    let context = AtomicBuf::from(context_buf);
    let chunk = p.pairs.len().div_ceil(workers).max(1);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..p.pairs.len()).collect();
        order.shuffle(&mut seeded(cfg.seed, 0x5E55_0000 + epoch as u64));
        order
            .par_chunks(chunk)
            .enumerate()
            .try_for_each(|(w, part)| -> Result<()> {
                let mut rng = seeded(derive_seed(cfg.seed, epoch as u64), w as u64 + 1);
                let mut grad = vec![0.0; d];
                let total = part.len() * cfg.epochs;
                for (local_step, &k) in part.iter().enumerate() {
                    let (v, c) = p.pairs[k];
                    let lr = learning_rate(cfg, epoch * part.len() + local_step, total);
                    let vrow = v as usize * d;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for s in 0..=cfg.negatives {
                        let (target, label) = if s == 0 {
                            (c, 1.0)
                        } else {
                            match draw_negative(table, &p.table_rows, c, &mut rng) {
                                Some(t) => (t, 0.0),
                                None => continue,
                            }
                        };
                        let trow = target as usize * d;
                        let f: f64 = (0..d).map(|i| input.get(vrow + i) * context.get(trow + i)).sum();
                        let g = (label - sigmoid(f)) * lr;
                        if !g.is_finite() {
                            return Err(IcmenError::NonFinite(format!("parallel update of pair {k}")));
                        }
                        for i in 0..d {
                            grad[i] += g * context.get(trow + i);
                            context.add(trow + i, g * input.get(vrow + i));
                        }
                    }
                    for (i, g) in grad.iter().enumerate() {
                        input.add(vrow + i, *g);
                    }
                }
                Ok(())
            })?;
    }
    input.copy_to(input_buf);
    context.copy_to(context_buf);
    Ok(())
}
