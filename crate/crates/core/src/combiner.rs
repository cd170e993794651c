//! Convex combination of calibrated snapshot embeddings.
//!
//! A node missing from some of the inputs is combined from the inputs that do
//! have it, with the weights restricted to those inputs and renormalized.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingMatrix, NodeVectors};
use crate::error::{IcmenError, Result};
use crate::graph::{NodeId, NodeRegistry};

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Weights on the simplex: each in `[0, 1]`, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AlphaVector(Vec<f64>);

impl AlphaVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(IcmenError::InvalidArgument("alpha vector is empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(IcmenError::InvalidArgument(format!("alpha weight {w} is outside [0, 1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(IcmenError::InvalidArgument(format!("alpha weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// `(alpha, 1 - alpha)`.
    pub fn pair(alpha: f64) -> Result<Self> {
        check_unit(alpha)?;
        Self::new(vec![alpha, 1.0 - alpha])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for AlphaVector {
    type Error = IcmenError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AlphaVector> for Vec<f64> {
    fn from(a: AlphaVector) -> Self {
        a.0
    }
}

fn check_unit(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(IcmenError::InvalidArgument(format!("alpha {alpha} is outside [0, 1]")))
    }
}

/// Restricts `alpha` to the `available` indices and rescales to sum to 1.
/// Falls back to uniform weights when the restricted mass is zero.
pub fn renormalize_alpha_for_node(alpha: &AlphaVector, available: &[usize]) -> Result<AlphaVector> {
    if available.is_empty() {
        return Err(IcmenError::InvalidArgument("no embedding available for node".into()));
    }
    if let Some(&i) = available.iter().find(|&&i| i >= alpha.len()) {
        return Err(IcmenError::InvalidArgument(format!(
            "index {i} out of range for {} weights",
            alpha.len()
        )));
    }
    if available.len() == alpha.len() {
        return Ok(alpha.clone());
    }
    let mass: f64 = available.iter().map(|&i| alpha.0[i]).sum();
    if mass <= 0.0 {
        return Ok(AlphaVector::uniform(available.len()));
    }
    Ok(AlphaVector(available.iter().map(|&i| alpha.0[i] / mass).collect()))
}

/// One row per node ever observed, with a record of which inputs contributed.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedEmbedding {
    dim: usize,
    sources: usize,
    nodes: Vec<NodeId>,
    rows: HashMap<NodeId, usize>,
    data: Vec<f64>,
    availability: Vec<Vec<bool>>,
}

impl CombinedEmbedding {
    fn with_capacity(dim: usize, sources: usize, nodes: usize) -> Self {
        Self {
            dim,
            sources,
            nodes: Vec::with_capacity(nodes),
            rows: HashMap::with_capacity(nodes),
            data: Vec::with_capacity(nodes * dim),
            availability: Vec::with_capacity(nodes),
        }
    }

    /// Wraps a single embedding (the first step of an iterative fold).
    pub fn from_single<V: NodeVectors>(m: &V) -> Self {
        let mut out = Self::with_capacity(m.dim(), 1, m.node_ids().len());
        for &n in m.node_ids() {
            out.push(n, m.vector(n).expect("listed node"), vec![true]);
        }
        out
    }

    fn push(&mut self, node: NodeId, row: &[f64], mask: Vec<bool>) {
        self.rows.insert(node, self.nodes.len());
        self.nodes.push(node);
        self.data.extend_from_slice(row);
        self.availability.push(mask);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of inputs the availability masks refer to.
    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn availability(&self, node: NodeId) -> Option<&[bool]> {
        self.rows.get(&node).map(|&i| self.availability[i].as_slice())
    }

    pub fn to_matrix(&self) -> EmbeddingMatrix {
        let mut m = EmbeddingMatrix::new(self.dim);
        for (i, &n) in self.nodes.iter().enumerate() {
            m.insert(n, &self.data[i * self.dim..(i + 1) * self.dim], None);
        }
        m
    }

    /// CSV `node,availability` with one bit per input, oldest first.
    pub fn write_availability_csv<W: Write>(&self, registry: &NodeRegistry, mut out: W) -> Result<()> {
        writeln!(out, "node,availability")?;
        for (n, mask) in self.nodes.iter().zip(&self.availability) {
            let label = registry.label(*n).ok_or(IcmenError::MissingNode(*n))?;
            let bits: String = mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(out, "{label},{bits}")?;
        }
        Ok(())
    }
}

impl NodeVectors for CombinedEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn node_ids(&self) -> &[NodeId] {
        &self.nodes
    }

    fn vector(&self, node: NodeId) -> Option<&[f64]> {
        let i = *self.rows.get(&node)?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }
}

fn check_dims(dims: impl Iterator<Item = usize>) -> Result<usize> {
    let mut dims = dims;
    let first = dims.next().ok_or_else(|| IcmenError::InsufficientData("no embeddings to combine".into()))?;
    for d in dims {
        if d != first {
            return Err(IcmenError::DimensionMismatch {
                expected: first,
                actual: d,
            });
        }
    }
    Ok(first)
}

/// `alpha * older + (1 - alpha) * newer`; nodes present in only one input keep
/// that input's row.
pub fn combine_basic<O: NodeVectors, N: NodeVectors>(older: &O, newer: &N, alpha: f64) -> Result<CombinedEmbedding> {
    check_unit(alpha)?;
    let dim = check_dims([older.dim(), newer.dim()].into_iter())?;
    let mut out = CombinedEmbedding::with_capacity(dim, 2, older.node_ids().len());
    let mut row = vec![0.0; dim];
    for &n in older.node_ids() {
        let x = older.vector(n).expect("listed node");
        match newer.vector(n) {
            Some(y) => {
                for ((r, a), b) in row.iter_mut().zip(x).zip(y) {
                    *r = alpha * a + (1.0 - alpha) * b;
                }
                out.push(n, &row, vec![true, true]);
            }
            None => out.push(n, x, vec![true, false]),
        }
    }
    for &n in newer.node_ids() {
        if !older.has_node(n) {
            out.push(n, newer.vector(n).expect("listed node"), vec![false, true]);
        }
    }
    Ok(out)
}

/// Folds `running ← alpha * running + (1 - alpha) * calibrate(next)` over the
/// sequence, oldest first. `calibrate` receives the next embedding and the
/// current running combination.
pub fn combine_iterative<F>(snapshots: &[EmbeddingMatrix], alpha: f64, mut calibrate: F) -> Result<CombinedEmbedding>
where
    F: FnMut(&EmbeddingMatrix, &CombinedEmbedding) -> Result<EmbeddingMatrix>,
{
    check_unit(alpha)?;
    let first = snapshots
        .first()
        .ok_or_else(|| IcmenError::InsufficientData("no embeddings to combine".into()))?;
    check_dims(snapshots.iter().map(|s| s.dim()))?;
    let total = snapshots.len();
    let mut running = CombinedEmbedding::from_single(first);
    for (t, next) in snapshots.iter().enumerate().skip(1) {
        let calibrated = calibrate(next, &running)?;
        let folded = combine_basic(&running, &calibrated, alpha)?;
        // carry the per-snapshot availability through the fold
        let mut masks = Vec::with_capacity(folded.len());
        for (i, &n) in folded.nodes.iter().enumerate() {
            let mut mask = running
                .availability(n)
                .map(<[bool]>::to_vec)
                .unwrap_or_else(|| vec![false; t]);
            mask.push(folded.availability[i][1]);
            masks.push(mask);
        }
        running = CombinedEmbedding {
            sources: t + 1,
            availability: masks,
            ..folded
        };
    }
    debug_assert_eq!(running.sources, total);
    Ok(running)
}

/// `alphaᵀ · [F_1, …, F_K]` per node, over the nodes each input has.
pub fn combine_generalized<V: NodeVectors>(seq: &[V], alpha: &AlphaVector) -> Result<CombinedEmbedding> {
    if seq.len() != alpha.len() {
        return Err(IcmenError::InvalidArgument(format!(
            "{} embeddings but {} weights",
            seq.len(),
            alpha.len()
        )));
    }
    let dim = check_dims(seq.iter().map(|s| s.dim()))?;
    let mut order = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for s in seq {
        for &n in s.node_ids() {
            if seen.insert(n) {
                order.push(n);
            }
        }
    }
    let mut out = CombinedEmbedding::with_capacity(dim, seq.len(), order.len());
    let mut row = vec![0.0; dim];
    let mut available = Vec::with_capacity(seq.len());
    for n in order {
        available.clear();
        available.extend((0..seq.len()).filter(|&k| seq[k].has_node(n)));
        let weights = renormalize_alpha_for_node(alpha, &available)?;
        for (j, (&k, &w)) in available.iter().zip(weights.weights()).enumerate() {
            let x = seq[k].vector(n).expect("available");
            if j == 0 {
                for (r, v) in row.iter_mut().zip(x) {
                    *r = w * v;
                }
            } else {
                for (r, v) in row.iter_mut().zip(x) {
                    *r += w * v;
                }
            }
        }
        let mask = (0..seq.len()).map(|k| available.contains(&k)).collect();
        out.push(n, &row, mask);
    }
    Ok(out)
}
