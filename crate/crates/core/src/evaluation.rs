//! Link-prediction harness: Hadamard edge features, negative sampling,
//! logistic regression and rank-based AUC.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::NodeVectors;
use crate::error::{IcmenError, Result};
use crate::graph::{NodeId, TemporalEdge};
use crate::rng;

pub type NodePair = (NodeId, NodeId);

const NEGATIVE_BUDGET: usize = 50;

/// Set of node pairs, unordered when undirected.
#[derive(Debug, Clone, Default)]
pub struct EdgeSet {
    directed: bool,
    pairs: HashSet<(u32, u32)>,
}

impl EdgeSet {
    pub fn new(directed: bool) -> Self {
        Self {
            directed,
            pairs: HashSet::new(),
        }
    }

    pub fn from_edges<'a>(edges: impl IntoIterator<Item = &'a TemporalEdge>, directed: bool) -> Self {
        let mut set = Self::new(directed);
        for e in edges {
            set.insert(e.src, e.dst);
        }
        set
    }

    fn key(&self, u: NodeId, v: NodeId) -> (u32, u32) {
        if self.directed || u.0 <= v.0 {
            (u.0, v.0)
        } else {
            (v.0, u.0)
        }
    }

    /// Returns true when the pair was not yet present.
    pub fn insert(&mut self, u: NodeId, v: NodeId) -> bool {
        let k = self.key(u, v);
        self.pairs.insert(k)
    }

    pub fn contains(&self, u: NodeId, v: NodeId) -> bool {
        self.pairs.contains(&self.key(u, v))
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodePair> + '_ {
        self.pairs.iter().map(|&(u, v)| (NodeId(u), NodeId(v)))
    }
}

/// Distinct pairs of `edges` in order of first appearance.
pub fn unique_pairs<'a>(edges: impl IntoIterator<Item = &'a TemporalEdge>, directed: bool) -> Vec<NodePair> {
    let mut seen = EdgeSet::new(directed);
    edges
        .into_iter()
        .filter(|e| seen.insert(e.src, e.dst))
        .map(|e| (e.src, e.dst))
        .collect()
}

/// Row-major feature block for the pairs whose endpoints both have rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatures {
    pub dim: usize,
    pub data: Vec<f64>,
    /// Indices into the requested pair list, one per feature row.
    pub kept: Vec<usize>,
    /// Indices of pairs with a missing endpoint.
    pub excluded: Vec<usize>,
}

impl EdgeFeatures {
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn hadamard_edge_features<V: NodeVectors>(emb: &V, pairs: &[NodePair]) -> EdgeFeatures {
    let dim = emb.dim();
    let mut out = EdgeFeatures {
        dim,
        data: Vec::with_capacity(pairs.len() * dim),
        kept: Vec::with_capacity(pairs.len()),
        excluded: Vec::new(),
    };
    for (i, &(u, v)) in pairs.iter().enumerate() {
        match (emb.vector(u), emb.vector(v)) {
            (Some(fu), Some(fv)) => {
                out.data.extend(fu.iter().zip(fv).map(|(a, b)| a * b));
                out.kept.push(i);
            }
            _ => out.excluded.push(i),
        }
    }
    out
}

/// Number of pairs over `nodes` (no self-loops) that are absent from `known`.
pub fn count_non_edges(known: &EdgeSet, nodes: &[NodeId]) -> usize {
    let n = nodes.len();
    let all = if known.is_directed() {
        n * n.saturating_sub(1)
    } else {
        n * n.saturating_sub(1) / 2
    };
    let members: HashSet<NodeId> = nodes.iter().copied().collect();
    let present = known
        .iter()
        .filter(|(u, v)| u != v && members.contains(u) && members.contains(v))
        .count();
    all - present
}

/// Uniform rejection sampling of distinct pairs over `nodes` that are not in
/// `known` and are not self-loops.
pub fn sample_negative_edges(known: &EdgeSet, nodes: &[NodeId], count: usize, seed: u64) -> Result<Vec<NodePair>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let available = count_non_edges(known, &nodes);
    if count > available {
        return Err(IcmenError::SamplingExhausted {
            attempts: 0,
            found: 0,
            wanted: count,
        });
    }
    let mut rng = rng::seeded(seed, 0);
    let mut drawn = EdgeSet::new(known.is_directed());
    let mut out = Vec::with_capacity(count);
    let budget = NEGATIVE_BUDGET * count;
    let mut attempts = 0;
    while out.len() < count && attempts < budget {
        attempts += 1;
        let u = nodes[rng.gen_range(0..nodes.len())];
        let v = nodes[rng.gen_range(0..nodes.len())];
        if u == v || known.contains(u, v) || !drawn.insert(u, v) {
            continue;
        }
        out.push((u, v));
    }
    if out.len() < count {
        return Err(IcmenError::SamplingExhausted {
            attempts,
            found: out.len(),
            wanted: count,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-4,
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(IcmenError::InvalidArgument("classifier learning rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(IcmenError::InvalidArgument("classifier L2 strength must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(IcmenError::InvalidArgument("classifier needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Logistic-regression model over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub config: ClassifierConfig,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl ClassifierModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut z = self.bias;
        for j in 0..self.weights.len() {
            z += self.weights[j] * (x[j] - self.mean[j]) / self.scale[j];
        }
        z
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) >= 0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2/2 * |w|²` and its gradient. `params` holds the
/// weights followed by the bias; `x` is row-major with `params.len() - 1`
/// columns. The bias is not penalized.
pub fn loss_and_gradient(params: &[f64], x: &[f64], labels: &[bool], l2: f64) -> (f64, Vec<f64>) {
    let dim = params.len() - 1;
    let n = labels.len() as f64;
    let (w, b) = params.split_at(dim);
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim + 1];
    for (row, &label) in x.chunks_exact(dim.max(1)).take(labels.len()).zip(labels) {
        let row = &row[..dim];
        let z = b[0] + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let y = if label { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for j in 0..dim {
            grad[j] += r * row[j];
        }
        grad[dim] += r;
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for j in 0..dim {
        grad[j] += l2 * w[j];
    }
    (loss, grad)
}

/// Fits L2-regularized logistic regression by full-batch gradient descent from
/// zero, with backtracking on the step size.
pub fn train_link_classifier(features: &EdgeFeatures, labels: &[bool], cfg: &ClassifierConfig) -> Result<ClassifierModel> {
    train_on_rows(features.dim, &features.data, labels, cfg)
}

pub fn train_on_rows(dim: usize, rows: &[f64], labels: &[bool], cfg: &ClassifierConfig) -> Result<ClassifierModel> {
    cfg.validate()?;
    if rows.len() != labels.len() * dim {
        return Err(IcmenError::DimensionMismatch {
            expected: labels.len() * dim,
            actual: rows.len(),
        });
    }
    if labels.len() < 2 || labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(IcmenError::InsufficientData(
            "classifier needs examples of both classes".into(),
        ));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(IcmenError::NonFinite("edge features".into()));
    }
    let n = labels.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in rows.chunks_exact(dim.max(1)).take(labels.len()) {
        for j in 0..dim {
            mean[j] += row[j];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut scale = vec![0.0; dim];
    for row in rows.chunks_exact(dim.max(1)).take(labels.len()) {
        for j in 0..dim {
            scale[j] += (row[j] - mean[j]).powi(2);
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if *s <= 1e-12 {
            *s = 1.0;
        }
    }
    let mut x = rows.to_vec();
    if dim > 0 {
        for row in x.chunks_exact_mut(dim) {
            for j in 0..dim {
                row[j] = (row[j] - mean[j]) / scale[j];
            }
        }
    }

    let mut params = vec![0.0; dim + 1];
    let (mut loss, mut grad) = loss_and_gradient(&params, &x, labels, cfg.l2);
    let mut gnorm = norm(&grad);
    let mut iterations = 0;
    let mut candidate = vec![0.0; dim + 1];
    while iterations < cfg.max_iterations && gnorm >= cfg.tolerance {
        iterations += 1;
        let mut step = cfg.learning_rate;
        loop {
            for j in 0..=dim {
                candidate[j] = params[j] - step * grad[j];
            }
            let (l, g) = loss_and_gradient(&candidate, &x, labels, cfg.l2);
            if l <= loss - 0.5 * step * gnorm * gnorm || step < 1e-12 {
                params.copy_from_slice(&candidate);
                loss = l;
                grad = g;
                break;
            }
            step *= 0.5;
        }
        gnorm = norm(&grad);
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(IcmenError::NonFinite("classifier weights".into()));
    }
    let bias = params.pop().expect("bias");
    Ok(ClassifierModel {
        weights: params,
        bias,
        mean,
        scale,
        config: *cfg,
        iterations,
        gradient_norm: gnorm,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mann-Whitney AUC; tied scores count one half.
pub fn compute_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(IcmenError::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(IcmenError::NonFinite("scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(IcmenError::InsufficientData("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; a tie group shares its average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Train/test pairs for one link-prediction task.
#[derive(Debug, Clone, Default)]
pub struct LinkTask {
    pub train_positive: Vec<NodePair>,
    pub train_negative: Vec<NodePair>,
    pub test_positive: Vec<NodePair>,
    pub test_negative: Vec<NodePair>,
}

#[derive(Debug, Clone)]
pub struct LinkResult {
    pub auc: f64,
    pub model: ClassifierModel,
    /// Test pairs actually scored (both endpoints embedded).
    pub scored: usize,
    pub excluded: usize,
}

fn labelled_features<V: NodeVectors>(emb: &V, pos: &[NodePair], neg: &[NodePair]) -> (EdgeFeatures, Vec<bool>) {
    let pairs: Vec<NodePair> = pos.iter().chain(neg).copied().collect();
    let f = hadamard_edge_features(emb, &pairs);
    let labels = f.kept.iter().map(|&i| i < pos.len()).collect();
    (f, labels)
}

/// Fits a classifier on the train pairs and returns per-test-pair predictions
/// (`None` for pairs with a missing endpoint). Test positives come first.
pub fn fit_and_predict<V: NodeVectors>(
    emb: &V,
    task: &LinkTask,
    cfg: &ClassifierConfig,
) -> Result<(ClassifierModel, Vec<Option<f64>>)> {
    let (train, labels) = labelled_features(emb, &task.train_positive, &task.train_negative);
    let model = train_link_classifier(&train, &labels, cfg)?;
    let test: Vec<NodePair> = task.test_positive.iter().chain(&task.test_negative).copied().collect();
    let f = hadamard_edge_features(emb, &test);
    let mut out = vec![None; test.len()];
    for (row, &i) in f.kept.iter().enumerate() {
        out[i] = Some(model.probability(f.row(row)));
    }
    Ok((model, out))
}

/// Trains on the task's train pairs and reports test AUC.
pub fn evaluate_link_prediction<V: NodeVectors>(emb: &V, task: &LinkTask, cfg: &ClassifierConfig) -> Result<LinkResult> {
    let (model, predictions) = fit_and_predict(emb, task, cfg)?;
    let mut scores = Vec::with_capacity(predictions.len());
    let mut labels = Vec::with_capacity(predictions.len());
    for (i, p) in predictions.iter().enumerate() {
        if let Some(s) = p {
            scores.push(*s);
            labels.push(i < task.test_positive.len());
        }
    }
    let auc = compute_auc(&scores, &labels)?;
    Ok(LinkResult {
        auc,
        model,
        scored: scores.len(),
        excluded: predictions.len() - scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingMatrix;
    use proptest::prelude::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn hadamard_products() {
        let emb = EmbeddingMatrix::from_rows(
            2,
            [(n(0), &[1.0, 2.0][..]), (n(1), &[3.0, 4.0][..]), (n(2), &[0.0, 0.0][..])],
        )
        .unwrap();
        let f = hadamard_edge_features(&emb, &[(n(0), n(1)), (n(1), n(0)), (n(0), n(2)), (n(0), n(7)), (n(1), n(1))]);
        assert_eq!(f.row(0), &[3.0, 8.0]);
        assert_eq!(f.row(0), f.row(1));
        assert_eq!(f.row(2), &[0.0, 0.0]);
        assert_eq!(f.row(3), &[9.0, 16.0]);
        assert_eq!(f.kept, vec![0, 1, 2, 4]);
        assert_eq!(f.excluded, vec![3]);
    }

    #[test]
    fn negatives_on_complete_graph_fail() {
        let nodes: Vec<NodeId> = (0..4).map(n).collect();
        let mut known = EdgeSet::new(false);
        for i in 0..4 {
            for j in i + 1..4 {
                known.insert(n(i), n(j));
            }
        }
        assert!(matches!(
            sample_negative_edges(&known, &nodes, 1, 0),
            Err(IcmenError::SamplingExhausted { .. })
        ));
    }

    #[test]
    fn negatives_cover_every_remaining_non_edge() {
        let nodes: Vec<NodeId> = (1..=4).map(n).collect();
        let mut known = EdgeSet::new(false);
        known.insert(n(1), n(2));
        // brute-force enumeration of the unordered non-edges
        let mut expected = Vec::new();
        for i in 1..=4u32 {
            for j in i + 1..=4 {
                if (i, j) != (1, 2) {
                    expected.push((i, j));
                }
            }
        }
        let got = sample_negative_edges(&known, &nodes, 5, 3).unwrap();
        let mut got: Vec<(u32, u32)> = got.iter().map(|(u, v)| (u.0.min(v.0), u.0.max(v.0))).collect();
        got.sort();
        assert_eq!(got, expected);
        assert!(sample_negative_edges(&known, &nodes, 6, 3).is_err());
        assert_eq!(
            sample_negative_edges(&known, &nodes, 3, 9).unwrap(),
            sample_negative_edges(&known, &nodes, 3, 9).unwrap()
        );
    }

    #[test]
    fn directed_negatives_are_ordered() {
        let nodes = vec![n(0), n(1)];
        let mut known = EdgeSet::new(true);
        known.insert(n(0), n(1));
        assert_eq!(sample_negative_edges(&known, &nodes, 1, 0).unwrap(), vec![(n(1), n(0))]);
    }

    fn separable() -> (Vec<f64>, Vec<bool>) {
        let x = vec![2.0, 1.0, 1.5, 2.5, 3.0, 2.0, -1.0, -2.0, -2.5, -0.5, -1.5, -1.0];
        let y = vec![true, true, true, false, false, false];
        (x, y)
    }

    #[test]
    fn separable_fixture_is_fit_exactly() {
        let (x, y) = separable();
        let m = train_on_rows(2, &x, &y, &ClassifierConfig::default()).unwrap();
        for (row, &label) in x.chunks(2).zip(&y) {
            assert_eq!(m.predict(row), label);
        }
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let x = vec![0.3, 1.0, -0.2, 0.4, 1.1, -0.7, 0.5, 0.2, -0.9, 0.8, 0.1, -0.3];
        let y = vec![true, false, true, true, false, false];
        let cfg = ClassifierConfig::default();
        let a = train_on_rows(2, &x, &y, &cfg).unwrap();
        let flipped: Vec<bool> = y.iter().map(|l| !l).collect();
        let b = train_on_rows(2, &x, &flipped, &cfg).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-6, "{wa} vs {wb}");
        }
        assert!((a.bias + b.bias).abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(train_on_rows(1, &[1.0, 2.0], &[true, true], &ClassifierConfig::default()).is_err());
        assert!(compute_auc(&[0.1, 0.2], &[false, false]).is_err());
    }

    #[test]
    fn auc_cases() {
        assert_eq!(compute_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(compute_auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(compute_auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
    }

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut count = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    count += 1.0;
                    total += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / count
    }

    fn central_difference(params: &[f64], x: &[f64], y: &[bool], l2: f64) -> Vec<f64> {
        (0..params.len())
            .map(|k| {
                let h = 1e-6 * params[k].abs().max(1.0);
                let mut up = params.to_vec();
                let mut down = params.to_vec();
                up[k] += h;
                down[k] -= h;
                (loss_and_gradient(&up, x, y, l2).0 - loss_and_gradient(&down, x, y, l2).0) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let auc = compute_auc(&scores, &labels).unwrap();
            prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() < 1e-12);
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(auc, compute_auc(&transformed, &labels).unwrap());
        }

        #[test]
        fn logistic_gradient_matches_finite_differences(
            params in prop::collection::vec(-2.0f64..2.0, 4),
            x in prop::collection::vec(-3.0f64..3.0, 24),
            y in prop::collection::vec(any::<bool>(), 8),
            l2 in 0.0f64..0.1,
        ) {
            let (_, g) = loss_and_gradient(&params, &x, &y, l2);
            let fd = central_difference(&params, &x, &y, l2);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-3), "{} vs {}", a, b);
            }
        }

        #[test]
        fn negatives_never_hit_known_edges(
            edges in prop::collection::vec((0u32..12, 0u32..12), 0..30),
            directed in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut known = EdgeSet::new(directed);
            for &(u, v) in &edges {
                known.insert(n(u), n(v));
            }
            let nodes: Vec<NodeId> = (0..12).map(n).collect();
            let count = count_non_edges(&known, &nodes).min(15);
            let sample = sample_negative_edges(&known, &nodes, count, seed).unwrap();
            let mut seen = EdgeSet::new(directed);
            for (u, v) in sample {
                prop_assert!(u != v);
                prop_assert!(!known.contains(u, v));
                prop_assert!(seen.insert(u, v));
            }
        }

        #[test]
        fn self_features_are_squares(row in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let emb = EmbeddingMatrix::from_rows(row.len(), [(n(0), row.as_slice())]).unwrap();
            let f = hadamard_edge_features(&emb, &[(n(0), n(0))]);
            for (a, b) in f.row(0).iter().zip(&row) {
                prop_assert_eq!(*a, b * b);
                prop_assert!(*a >= 0.0);
            }
        }
    }
}
