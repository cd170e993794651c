//! Estimation of the combination weights: Dirichlet-Multinomial MAP from
//! per-embedding link-prediction successes, or grid search.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::AlphaVector;
use crate::embedding::NodeVectors;
use crate::error::{IcmenError, Result};
use crate::evaluation::{fit_and_predict, sample_negative_edges, unique_pairs, ClassifierConfig, EdgeSet, LinkTask, NodePair};
use crate::graph::{fraction_count, NodeId, Snapshot};
use crate::rng;

/// Credited correct predictions per embedding, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassCounts(pub Vec<u64>);

impl ClassCounts {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorStrategy {
    Uniform,
    Increasing,
}

impl FromStr for PriorStrategy {
    type Err = IcmenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "increasing" => Ok(Self::Increasing),
            other => Err(IcmenError::InvalidArgument(format!("unknown prior strategy `{other}`"))),
        }
    }
}

impl fmt::Display for PriorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Increasing => "increasing",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrior {
    beta: Vec<f64>,
    strategy: PriorStrategy,
}

impl DirichletPrior {
    /// Explicit concentrations; they must agree with the strategy tag.
    pub fn with_beta(beta: Vec<f64>, strategy: PriorStrategy) -> Result<Self> {
        if beta.is_empty() {
            return Err(IcmenError::InvalidArgument("prior needs at least one concentration".into()));
        }
        if beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(IcmenError::InvalidArgument("prior concentrations must be positive".into()));
        }
        let ok = match strategy {
            PriorStrategy::Uniform => beta.iter().all(|&b| b == 1.0),
            PriorStrategy::Increasing => beta.windows(2).all(|w| w[0] < w[1]),
        };
        if !ok {
            return Err(IcmenError::InvalidArgument(format!("concentrations {beta:?} are not {strategy}")));
        }
        Ok(Self { beta, strategy })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn strategy(&self) -> PriorStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Uniform gives all ones; increasing gives `1, 2, …, k`.
pub fn build_prior(k: usize, strategy: PriorStrategy) -> Result<DirichletPrior> {
    if k == 0 {
        return Err(IcmenError::InvalidArgument("prior needs K >= 1".into()));
    }
    let beta = match strategy {
        PriorStrategy::Uniform => vec![1.0; k],
        PriorStrategy::Increasing => (1..=k).map(|i| i as f64).collect(),
    };
    DirichletPrior::with_beta(beta, strategy)
}

/// Posterior mode `(N_i + β_i − 1) / (N + Σβ − K)`.
pub fn map_estimate(counts: &ClassCounts, prior: &DirichletPrior) -> Result<AlphaVector> {
    if counts.len() != prior.len() {
        return Err(IcmenError::DimensionMismatch {
            expected: prior.len(),
            actual: counts.len(),
        });
    }
    if counts.len() == 1 {
        return AlphaVector::new(vec![1.0]);
    }
    let mut numerators: Vec<f64> = counts.0.iter().zip(prior.beta()).map(|(&n, &b)| n as f64 + b - 1.0).collect();
    if numerators.iter().any(|&x| x < 0.0) {
        warn!("negative posterior mass {numerators:?} clamped to zero");
        for x in &mut numerators {
            *x = x.max(0.0);
        }
    }
    // Equal to N + Σβ − K whenever nothing was clamped.
    let denominator: f64 = numerators.iter().sum();
    if denominator <= 0.0 {
        return Err(IcmenError::EmptySample(format!(
            "no posterior mass for counts {:?} and prior {:?}",
            counts.0,
            prior.beta()
        )));
    }
    AlphaVector::new(numerators.iter().map(|x| x / denominator).collect())
}

/// Candidate weight vectors, tried in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaGrid(Vec<AlphaVector>);

impl AlphaGrid {
    pub fn new(candidates: Vec<AlphaVector>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(IcmenError::InvalidArgument("alpha grid is empty".into()));
        }
        let k = candidates[0].len();
        if candidates.iter().any(|c| c.len() != k) {
            return Err(IcmenError::InvalidArgument("alpha grid mixes vector lengths".into()));
        }
        Ok(Self(candidates))
    }

    /// Two-way candidates `(λ, 1 − λ)`, with λ the weight on the older input.
    pub fn basic(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| AlphaVector::pair(v)).collect::<Result<_>>()?)
    }

    /// `{0.0, 0.1, …, 1.0}`.
    pub fn default_basic() -> Self {
        Self::basic(&(0..=10).map(|i| i as f64 / 10.0).collect::<Vec<_>>()).expect("valid grid")
    }

    /// Every point of the `k`-simplex whose coordinates are multiples of `1/steps`.
    pub fn simplex(k: usize, steps: usize) -> Result<Self> {
        if k == 0 || steps == 0 {
            return Err(IcmenError::InvalidArgument("simplex grid needs k >= 1 and steps >= 1".into()));
        }
        let mut out = Vec::new();
        let mut parts = vec![0usize; k];
        fn fill(i: usize, left: usize, parts: &mut Vec<usize>, steps: usize, out: &mut Vec<AlphaVector>) {
            if i + 1 == parts.len() {
                parts[i] = left;
                let w = parts.iter().map(|&p| p as f64 / steps as f64).collect();
                out.push(AlphaVector::new(w).expect("simplex point"));
                return;
            }
            for p in 0..=left {
                parts[i] = p;
                fill(i + 1, left - p, parts, steps, out);
            }
        }
        fill(0, steps, &mut parts, steps, &mut out);
        Self::new(out)
    }

    pub fn candidates(&self) -> &[AlphaVector] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Returns the candidate with the highest score and that score. Ties keep the
/// earlier candidate; failed or NaN evaluations are skipped.
pub fn grid_search_alpha<F>(grid: &AlphaGrid, mut evaluator: F) -> Result<(AlphaVector, f64)>
where
    F: FnMut(&AlphaVector) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in grid.candidates().iter().enumerate() {
        match evaluator(c) {
            Ok(score) if score.is_nan() => warn!("alpha candidate {:?} scored NaN; skipped", c.weights()),
            Ok(score) => {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((i, score));
                }
            }
            Err(e) => warn!("alpha candidate {:?} failed: {e}; skipped", c.weights()),
        }
    }
    let (i, score) = best.ok_or_else(|| IcmenError::InsufficientData("every alpha candidate failed".into()))?;
    Ok((grid.candidates()[i].clone(), score))
}

/// Credits each trial to one uniformly chosen embedding among those that got
/// it right; trials nobody got right are dropped. `correct[k][t]` says whether
/// embedding `k` classified trial `t` correctly.
pub fn credit_correct_predictions<R: Rng>(correct: &[Vec<bool>], rng: &mut R) -> Result<ClassCounts> {
    let k = correct.len();
    let trials = correct.first().map_or(0, Vec::len);
    if correct.iter().any(|c| c.len() != trials) {
        return Err(IcmenError::InvalidArgument("prediction vectors differ in length".into()));
    }
    let mut counts = vec![0u64; k];
    let mut winners = Vec::with_capacity(k);
    for t in 0..trials {
        winners.clear();
        winners.extend((0..k).filter(|&j| correct[j][t]));
        if !winners.is_empty() {
            counts[winners[rng.gen_range(0..winners.len())]] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(IcmenError::EmptySample("no trial was predicted correctly by any embedding".into()));
    }
    Ok(ClassCounts(counts))
}

/// Minimum number of events in the snapshot used for counting.
pub const MIN_COUNTING_EDGES: usize = 10;

/// Link-prediction trials on `last`: its distinct pairs, split chronologically,
/// plus as many sampled non-edges. Only pairs whose endpoints are embedded by
/// every member of `seq` are kept, so all embeddings face the same trials.
pub fn build_counting_task<V: NodeVectors>(seq: &[V], last: &Snapshot, split_ratio: f64, seed: u64) -> Result<LinkTask> {
    if last.edges().len() < MIN_COUNTING_EDGES {
        return Err(IcmenError::InsufficientData(format!(
            "snapshot {} has {} events; at least {MIN_COUNTING_EDGES} are needed",
            last.period(),
            last.edges().len()
        )));
    }
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(IcmenError::InvalidArgument(format!("split ratio {split_ratio} is outside (0, 1)")));
    }
    let covered: Vec<NodeId> = last.nodes().iter().copied().filter(|&n| seq.iter().all(|e| e.has_node(n))).collect();
    let covered_set: HashSet<NodeId> = covered.iter().copied().collect();
    let pairs = unique_pairs(last.edges(), last.is_directed());
    let cut = fraction_count(split_ratio, pairs.len());
    let keep = |p: &&NodePair| covered_set.contains(&p.0) && covered_set.contains(&p.1);
    let train: Vec<NodePair> = pairs[..cut].iter().filter(keep).copied().collect();
    let test: Vec<NodePair> = pairs[cut..].iter().filter(keep).copied().collect();
    if train.is_empty() || test.is_empty() {
        return Err(IcmenError::InsufficientData(format!(
            "{} train and {} test pairs are embedded by every input",
            train.len(),
            test.len()
        )));
    }
    let known = EdgeSet::from_edges(last.edges(), last.is_directed());
    let negatives = sample_negative_edges(&known, &covered, train.len() + test.len(), seed)?;
    let (train_neg, test_neg) = negatives.split_at(train.len());
    Ok(LinkTask {
        train_positive: train,
        train_negative: train_neg.to_vec(),
        test_positive: test,
        test_negative: test_neg.to_vec(),
    })
}

/// Per-embedding class counts on the most recent snapshot.
pub fn collect_class_counts<V: NodeVectors + Sync>(
    seq: &[V],
    last: &Snapshot,
    split_ratio: f64,
    classifier: &ClassifierConfig,
    seed: u64,
) -> Result<ClassCounts> {
    if seq.len() < 2 {
        return Err(IcmenError::InvalidArgument("class counting needs at least two embeddings".into()));
    }
    let task = build_counting_task(seq, last, split_ratio, rng::derive_seed(seed, 1))?;
    let positives = task.test_positive.len();
    let correct = seq
        .par_iter()
        .map(|emb| {
            let (_, predictions) = fit_and_predict(emb, &task, classifier)?;
            Ok(predictions
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let p = p.expect("trial endpoints are embedded");
                    (p >= 0.5) == (i < positives)
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;
    let mut rng = rng::seeded(seed, 2);
    credit_correct_predictions(&correct, &mut rng)
}
