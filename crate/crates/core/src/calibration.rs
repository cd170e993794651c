//! Reference-node selection and linear calibration between embedding spaces.
//!
//! A calibration map sends a row `x` of a new embedding to `x·A + b`, where
//! `A` is fitted by ridge regression on reference nodes so that the new rows
//! land near the rows of the embedding they are aligned to.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::embedding::{read_text_rows, write_text_rows, EmbeddingMatrix, NodeVectors};
use crate::error::{IcmenError, Result};
use crate::graph::{NodeId, Snapshot};

/// Per-node centrality values for one period.
pub type Centrality = BTreeMap<NodeId, f64>;

/// Number of events incident to `node` in the snapshot (0 when absent).
pub fn temporal_degree(node: NodeId, snapshot: &Snapshot) -> usize {
    snapshot.edges().iter().filter(|e| e.touches(node)).count()
}

/// Temporal degree of every node of the snapshot, in one pass.
pub fn temporal_degrees(snapshot: &Snapshot) -> Centrality {
    let mut out = Centrality::new();
    for e in snapshot.edges() {
        *out.entry(e.src).or_default() += 1.0;
        if e.dst != e.src {
            *out.entry(e.dst).or_default() += 1.0;
        }
    }
    out
}

/// `|g_prev - g_curr| * (π/2 - atan(min(g_prev, g_curr)))`.
///
/// Differences between low-activity values are penalized more than the same
/// difference between high-activity values.
pub fn node_change_score(g_prev: f64, g_curr: f64) -> Result<f64> {
    if !(g_prev >= 0.0 && g_curr >= 0.0) {
        return Err(IcmenError::InvalidArgument(format!(
            "centralities must be non-negative, got {g_prev} and {g_curr}"
        )));
    }
    Ok((g_prev - g_curr).abs() * (FRAC_PI_2 - g_prev.min(g_curr).atan()))
}

/// Reference nodes, least changed first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceSet {
    pub nodes: Vec<NodeId>,
    pub scores: Vec<f64>,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn truncated(&self, n: usize) -> ReferenceSet {
        let n = n.min(self.len());
        ReferenceSet {
            nodes: self.nodes[..n].to_vec(),
            scores: self.scores[..n].to_vec(),
        }
    }
}

/// Ranks nodes present in both periods by change score (ascending; ties go to
/// the higher `min(g)`, then the lower node id) and keeps the first `n`.
pub fn select_reference_nodes(prev: &Centrality, curr: &Centrality, n: usize) -> Result<ReferenceSet> {
    if n == 0 {
        return Err(IcmenError::InvalidArgument("reference count must be >= 1".into()));
    }
    let mut ranked: Vec<(f64, f64, NodeId)> = prev
        .iter()
        .filter_map(|(node, &gp)| curr.get(node).map(|&gc| (node, gp, gc)))
        .map(|(node, gp, gc)| Ok((node_change_score(gp, gc)?, gp.min(gc), *node)))
        .collect::<Result<_>>()?;
    if ranked.is_empty() {
        return Err(IcmenError::InsufficientData(
            "no node is present in both periods".into(),
        ));
    }
    ranked.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    if ranked.len() < n {
        log::warn!(
            "requested {n} reference nodes but only {} common nodes exist",
            ranked.len()
        );
    }
    ranked.truncate(n);
    Ok(ReferenceSet {
        scores: ranked.iter().map(|r| r.0).collect(),
        nodes: ranked.into_iter().map(|r| r.2).collect(),
    })
}

/// `max(3d, ceil(10% of common nodes))`.
pub fn default_reference_count(dim: usize, common: usize) -> usize {
    (3 * dim).max(common.div_ceil(10))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMap {
    dim: usize,
    /// Row-major `d × d`.
    matrix: Vec<f64>,
    intercept: Vec<f64>,
    lambda: f64,
    /// Column scales the penalty was applied in (standardized columns).
    penalty_scales: Vec<f64>,
}

impl CalibrationMap {
    pub fn new(dim: usize, matrix: Vec<f64>, intercept: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim || intercept.len() != dim {
            return Err(IcmenError::DimensionMismatch {
                expected: dim * dim + dim,
                actual: matrix.len() + intercept.len(),
            });
        }
        Ok(Self {
            dim,
            matrix,
            intercept,
            lambda: 0.0,
            penalty_scales: vec![1.0; dim],
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Self::new(dim, m, vec![0.0; dim]).expect("square")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    pub fn matrix_mut(&mut self) -> &mut [f64] {
        &mut self.matrix
    }

    pub fn intercept_mut(&mut self) -> &mut [f64] {
        &mut self.intercept
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().chain(&self.intercept).all(|v| v.is_finite())
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = self.intercept.clone();
        for (i, &x) in row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let a = &self.matrix[i * d..(i + 1) * d];
            for (o, &aij) in out.iter_mut().zip(a) {
                *o += x * aij;
            }
        }
        out
    }

    /// Squared residual over reference rows plus the ridge penalty.
    pub fn objective<S: NodeVectors, T: NodeVectors>(&self, source: &S, target: &T, refs: &[NodeId]) -> Result<f64> {
        let mut loss = 0.0;
        for &r in refs {
            let x = source.vector(r).ok_or(IcmenError::MissingNode(r))?;
            let y = target.vector(r).ok_or(IcmenError::MissingNode(r))?;
            loss += self
                .transform(x)
                .iter()
                .zip(y)
                .map(|(p, t)| (p - t).powi(2))
                .sum::<f64>();
        }
        let d = self.dim;
        let penalty: f64 = (0..d)
            .map(|i| {
                let s2 = self.penalty_scales[i].powi(2);
                self.matrix[i * d..(i + 1) * d].iter().map(|a| a * a * s2).sum::<f64>()
            })
            .sum();
        Ok(loss + self.lambda * penalty)
    }

    /// Mean squared residual per coordinate over `refs`.
    pub fn residual<S: NodeVectors, T: NodeVectors>(&self, source: &S, target: &T, refs: &[NodeId]) -> Result<f64> {
        let mut total = 0.0;
        for &r in refs {
            let x = source.vector(r).ok_or(IcmenError::MissingNode(r))?;
            let y = target.vector(r).ok_or(IcmenError::MissingNode(r))?;
            total += self.transform(x).iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>();
        }
        Ok(total / (refs.len().max(1) * self.dim) as f64)
    }

    /// Text audit format: `d` matrix rows labelled `0..d`, then `intercept`.
    pub fn write_text<W: Write>(&self, out: W) -> Result<()> {
        let labels: Vec<String> = (0..self.dim).map(|i| i.to_string()).chain(["intercept".to_string()]).collect();
        let rows: Vec<&[f64]> = self
            .matrix
            .chunks(self.dim)
            .chain([self.intercept.as_slice()])
            .collect();
        write_text_rows(out, self.dim, labels.iter().map(String::as_str).zip(rows))
    }

    pub fn read_text<R: BufRead>(source: R) -> Result<Self> {
        let (dim, rows) = read_text_rows(source)?;
        if rows.len() != dim + 1 || rows.last().map(|r| r.0.as_str()) != Some("intercept") {
            return Err(IcmenError::Format("calibration map needs d rows plus an intercept row".into()));
        }
        let mut matrix = Vec::with_capacity(dim * dim);
        for (_, r) in &rows[..dim] {
            matrix.extend_from_slice(r);
        }
        Self::new(dim, matrix, rows[dim].1.clone())
    }

    /// Binary form: the embedding binary layout with rows labelled `0..d`
    /// and the intercept labelled `d`.
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        let (matrix, registry) = self.as_embedding();
        matrix.write_binary(&registry, out)
    }

    pub fn read_binary<R: std::io::Read>(source: R) -> Result<Self> {
        let mut registry = crate::graph::NodeRegistry::new();
        let m = EmbeddingMatrix::read_binary(source, &mut registry)?;
        let dim = m.dim();
        if m.len() != dim + 1 {
            return Err(IcmenError::Format("calibration map needs d + 1 rows".into()));
        }
        let row = |label: u64| -> Result<Vec<f64>> {
            let id = registry.id(label).ok_or_else(|| IcmenError::Format(format!("missing row {label}")))?;
            Ok(m.input(id).ok_or(IcmenError::MissingNode(id))?.to_vec())
        };
        let mut matrix = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            matrix.extend(row(i as u64)?);
        }
        Self::new(dim, matrix, row(dim as u64)?)
    }

    fn as_embedding(&self) -> (EmbeddingMatrix, crate::graph::NodeRegistry) {
        let mut registry = crate::graph::NodeRegistry::new();
        let mut m = EmbeddingMatrix::new(self.dim);
        for (i, r) in self.matrix.chunks(self.dim).enumerate() {
            m.insert(registry.get_or_insert(i as u64), r, None);
        }
        m.insert(registry.get_or_insert(self.dim as u64), &self.intercept, None);
        (m, registry)
    }
}

/// Fits `A*, b` so that `source_row · A* + b ≈ target_row` on the reference
/// nodes: one ridge regression per output dimension, sharing the normal
/// matrix. Columns are standardized before the penalty is applied; the
/// intercept is not penalized.
pub fn fit_calibration<S: NodeVectors, T: NodeVectors>(
    source: &S,
    target: &T,
    refs: &[NodeId],
    lambda: f64,
    intercept: bool,
) -> Result<CalibrationMap> {
    let d = source.dim();
    if target.dim() != d {
        return Err(IcmenError::DimensionMismatch {
            expected: d,
            actual: target.dim(),
        });
    }
    if refs.len() < 2 {
        return Err(IcmenError::InsufficientData(format!(
            "calibration needs at least 2 reference nodes, got {}",
            refs.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(IcmenError::InvalidArgument(format!("ridge constant {lambda} must be >= 0")));
    }
    let m = refs.len();
    let mut x = DMatrix::<f64>::zeros(m, d);
    let mut y = DMatrix::<f64>::zeros(m, d);
    for (i, &r) in refs.iter().enumerate() {
        let xs = source.vector(r).ok_or(IcmenError::MissingNode(r))?;
        let ys = target.vector(r).ok_or(IcmenError::MissingNode(r))?;
        for j in 0..d {
            x[(i, j)] = xs[j];
            y[(i, j)] = ys[j];
        }
    }

    let (x_mean, y_mean) = if intercept {
        (x.row_mean(), y.row_mean())
    } else {
        (nalgebra::RowDVector::zeros(d), nalgebra::RowDVector::zeros(d))
    };
    for mut row in x.row_iter_mut() {
        row -= &x_mean;
    }
    for mut row in y.row_iter_mut() {
        row -= &y_mean;
    }
    let scales: Vec<f64> = (0..d)
        .map(|j| {
            let s = (x.column(j).norm_squared() / m as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (j, &s) in scales.iter().enumerate() {
        x.column_mut(j).unscale_mut(s);
    }

    let mut gram = x.transpose() * &x;
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let rhs = x.transpose() * &y;
    let chol = gram.cholesky().ok_or(IcmenError::SingularCalibration)?;
    let b_std = chol.solve(&rhs);
    if b_std.iter().any(|v| !v.is_finite()) {
        return Err(IcmenError::SingularCalibration);
    }
    if lambda == 0.0 {
        // Cholesky can succeed on a numerically rank-deficient Gram matrix.
        let diag_max = (0..d).map(|j| x.column(j).norm_squared()).fold(0.0, f64::max);
        let l_min = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if l_min * l_min < diag_max * 1e-13 {
            return Err(IcmenError::SingularCalibration);
        }
    }

    let mut matrix = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            matrix[i * d + j] = b_std[(i, j)] / scales[i];
        }
    }
    let mut b = vec![0.0; d];
    for j in 0..d {
        let shift: f64 = (0..d).map(|i| x_mean[i] * matrix[i * d + j]).sum();
        b[j] = y_mean[j] - shift;
    }
    let map = CalibrationMap {
        dim: d,
        matrix,
        intercept: b,
        lambda,
        penalty_scales: scales,
    };
    if !map.is_finite() {
        return Err(IcmenError::NonFinite("calibration fit".into()));
    }
    Ok(map)
}

/// Replaces every input row `x` by `x·A + b`. Context vectors are untouched.
pub fn apply_calibration(matrix: &EmbeddingMatrix, map: &CalibrationMap) -> Result<EmbeddingMatrix> {
    if matrix.dim() != map.dim() {
        return Err(IcmenError::DimensionMismatch {
            expected: map.dim(),
            actual: matrix.dim(),
        });
    }
    let mut out = matrix.clone();
    for i in 0..out.len() {
        let mapped = map.transform(matrix.input_at(i));
        out.input_at_mut(i).copy_from_slice(&mapped);
    }
    Ok(out)
}

/// Picks the reference count from `candidates` whose fit has the lowest
/// residual on a held-out fifth of its reference rows (every fifth row by rank).
pub fn choose_reference_count<S: NodeVectors, T: NodeVectors>(
    ranked: &ReferenceSet,
    candidates: &[usize],
    source: &S,
    target: &T,
    lambda: f64,
    intercept: bool,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &n in candidates {
        let refs = ranked.truncated(n);
        let (held, fit): (Vec<(usize, NodeId)>, Vec<(usize, NodeId)>) =
            refs.nodes.iter().copied().enumerate().partition(|(i, _)| i % 5 == 4);
        let held: Vec<NodeId> = held.into_iter().map(|(_, n)| n).collect();
        let fit: Vec<NodeId> = fit.into_iter().map(|(_, n)| n).collect();
        if held.is_empty() || fit.len() < 2 {
            continue;
        }
        let map = match fit_calibration(source, target, &fit, lambda, intercept) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("reference count {n}: {e}");
                continue;
            }
        };
        let r = map.residual(source, target, &held)?;
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((refs.len(), r));
        }
    }
    best.map(|(n, _)| n)
        .ok_or_else(|| IcmenError::InsufficientData("no reference count candidate could be evaluated".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TemporalEdge;
    use crate::rng::seeded;
    use rand::Rng;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn random_matrix(rows: u32, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = seeded(seed, 0);
        let mut m = EmbeddingMatrix::new(d);
        for i in 0..rows {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.insert(n(i), &row, None);
        }
        m
    }

    fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed, 1);
        let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        g.qr().q()
    }

    fn map_rows(m: &EmbeddingMatrix, r: &DMatrix<f64>, b: &[f64]) -> EmbeddingMatrix {
        let d = m.dim();
        let mut out = EmbeddingMatrix::new(d);
        for &node in m.nodes() {
            let x = m.input(node).unwrap();
            let y: Vec<f64> = (0..d).map(|j| (0..d).map(|i| x[i] * r[(i, j)]).sum::<f64>() + b[j]).collect();
            out.insert(node, &y, None);
        }
        out
    }

    #[test]
    fn degree_counts() {
        let s = Snapshot::from_edges(
            1,
            vec![
                TemporalEdge::new(n(0), n(1), 1.0),
                TemporalEdge::new(n(0), n(2), 2.0),
                TemporalEdge::new(n(3), n(0), 3.0),
                TemporalEdge::new(n(1), n(2), 4.0),
            ],
            true,
        );
        assert_eq!(temporal_degree(n(0), &s), 3);
        assert_eq!(temporal_degree(n(9), &s), 0);
        let all = temporal_degrees(&s);
        for &node in s.nodes() {
            assert_eq!(all[&node] as usize, temporal_degree(node, &s));
        }
    }

    #[test]
    fn directed_degree_counts_in_and_out() {
        let mut edges = Vec::new();
        for t in 0..2 {
            edges.push(TemporalEdge::new(n(1), n(0), t as f64));
        }
        for t in 0..5 {
            edges.push(TemporalEdge::new(n(0), n(2 + t), 10.0 + t as f64));
        }
        edges.push(TemporalEdge::new(n(3), n(4), 20.0));
        let s = Snapshot::from_edges(1, edges, true);
        let brute = s.edges().iter().filter(|e| e.src == n(0) || e.dst == n(0)).count();
        assert_eq!(brute, 7);
        assert_eq!(temporal_degree(n(0), &s), brute);
    }

    #[test]
    fn change_score_values() {
        assert_eq!(node_change_score(5.0, 5.0).unwrap(), 0.0);
        assert!((node_change_score(0.0, 5.0).unwrap() - 5.0 * FRAC_PI_2).abs() < 1e-12);
        assert!((node_change_score(0.0, 5.0).unwrap() - 7.8540).abs() < 1e-4);
        let s = node_change_score(100.0, 105.0).unwrap();
        assert!((s - 5.0 * (FRAC_PI_2 - 100f64.atan())).abs() < 1e-15);
        assert!((s - 0.04999).abs() < 1e-5, "{s}");
        assert!(node_change_score(-1.0, 2.0).is_err());
    }

    #[test]
    fn change_score_symmetric_and_monotone() {
        let mut rng = seeded(3, 3);
        for _ in 0..1000 {
            let a = rng.gen_range(0.0..50.0f64).floor();
            let b = rng.gen_range(0.0..50.0f64).floor();
            assert_eq!(node_change_score(a, b).unwrap(), node_change_score(b, a).unwrap());
            let m = a.min(b);
            let d1 = rng.gen_range(0.0..10.0);
            let d2 = d1 + rng.gen_range(0.01..10.0);
            assert!(node_change_score(m, m + d1).unwrap() < node_change_score(m, m + d2).unwrap());
        }
    }

    fn cent(pairs: &[(u32, f64)]) -> Centrality {
        pairs.iter().map(|&(i, g)| (n(i), g)).collect()
    }

    #[test]
    fn reference_selection() {
        // a unchanged, b changed by 3 at zero activity
        let r = select_reference_nodes(&cent(&[(0, 4.0), (1, 0.0)]), &cent(&[(0, 4.0), (1, 3.0)]), 1).unwrap();
        assert_eq!(r.nodes, vec![n(0)]);

        let r = select_reference_nodes(&cent(&[(0, 10.0), (1, 2.0)]), &cent(&[(0, 10.0), (1, 2.0)]), 1).unwrap();
        assert_eq!(r.nodes, vec![n(0)]);

        let prev: Centrality = (0..40).map(|i| (n(i), 1.0)).chain((100..130).map(|i| (n(i), 1.0))).collect();
        let curr: Centrality = (0..40).map(|i| (n(i), 2.0)).chain((200..230).map(|i| (n(i), 1.0))).collect();
        let r = select_reference_nodes(&prev, &curr, 100).unwrap();
        assert_eq!(r.len(), 40);

        assert!(select_reference_nodes(&cent(&[(0, 1.0)]), &cent(&[(1, 1.0)]), 5).is_err());
        assert!(select_reference_nodes(&cent(&[(0, 1.0)]), &cent(&[(0, 1.0)]), 0).is_err());
    }

    #[test]
    fn identity_fit() {
        let src = random_matrix(100, 8, 1);
        let map = fit_calibration(&src, &src, src.nodes(), 1e-8, true).unwrap();
        let mut err = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let e = map.matrix()[i * 8 + j] - if i == j { 1.0 } else { 0.0 };
                err += e * e;
            }
        }
        assert!(err.sqrt() < 1e-4, "{}", err.sqrt());
        assert!(map.intercept().iter().all(|b| b.abs() < 1e-6));
    }

    #[test]
    fn recovers_rotation_and_translation() {
        let src = random_matrix(200, 8, 2);
        let r = random_orthogonal(8, 5);
        let b = [0.5, -1.0, 2.0, 0.0, 0.1, -0.3, 1.5, 0.7];
        let tgt = map_rows(&src, &r, &b);

        // Oracle: direct normal equations on the augmented design [X 1].
        let m = 200;
        let xa = DMatrix::from_fn(m, 9, |i, j| if j == 8 { 1.0 } else { src.input_at(i)[j] });
        let ya = DMatrix::from_fn(m, 8, |i, j| tgt.input_at(i)[j]);
        let oracle = (xa.transpose() * &xa).lu().solve(&(xa.transpose() * &ya)).unwrap();

        let map = fit_calibration(&src, &tgt, src.nodes(), 1e-6, true).unwrap();
        let mut dist_r = 0.0;
        let mut dist_oracle = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                dist_r += (map.matrix()[i * 8 + j] - r[(i, j)]).powi(2);
                dist_oracle += (map.matrix()[i * 8 + j] - oracle[(i, j)]).powi(2);
            }
            assert!((map.intercept()[i] - b[i]).abs() < 1e-4);
        }
        assert!(dist_r.sqrt() < 1e-3, "{}", dist_r.sqrt());
        assert!(dist_oracle.sqrt() < 1e-3);

        let applied = apply_calibration(&src, &map).unwrap();
        for &node in src.nodes() {
            for (a, t) in applied.input(node).unwrap().iter().zip(tgt.input(node).unwrap()) {
                assert!((a - t).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn translation_goes_to_intercept() {
        let src = random_matrix(60, 4, 3);
        let b = [1.0, 2.0, -3.0, 0.25];
        let tgt = map_rows(&src, &DMatrix::identity(4, 4), &b);
        let map = fit_calibration(&src, &tgt, src.nodes(), 1e-8, true).unwrap();
        for i in 0..4 {
            assert!((map.intercept()[i] - b[i]).abs() < 1e-6);
            assert!((map.matrix()[i * 4 + i] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_without_ridge_is_error() {
        let mut src = EmbeddingMatrix::new(3);
        for i in 0..10 {
            src.insert(n(i), &[i as f64, 2.0 * i as f64, 1.0], None);
        }
        let err = fit_calibration(&src, &src, src.nodes(), 0.0, true).unwrap_err();
        assert!(matches!(err, IcmenError::SingularCalibration), "{err}");
        assert!(fit_calibration(&src, &src, src.nodes(), 1e-3, true).is_ok());
        assert!(fit_calibration(&src, &src, &[n(0)], 1e-3, true).is_err());
    }

    #[test]
    fn ridge_solution_is_a_minimum() {
        let src = random_matrix(50, 6, 4);
        let tgt = random_matrix(50, 6, 5);
        let refs = src.nodes().to_vec();
        let map = fit_calibration(&src, &tgt, &refs, 0.5, true).unwrap();
        let best = map.objective(&src, &tgt, &refs).unwrap();
        let mut rng = seeded(6, 6);
        for _ in 0..200 {
            let mut p = map.clone();
            for v in p.matrix_mut() {
                *v += if rng.gen::<bool>() { 1e-3 } else { -1e-3 };
            }
            for v in p.intercept_mut() {
                *v += if rng.gen::<bool>() { 1e-3 } else { -1e-3 };
            }
            assert!(p.objective(&src, &tgt, &refs).unwrap() >= best);
        }
    }

    #[test]
    fn apply_identity_and_scaling() {
        let src = random_matrix(5, 2, 7);
        assert_eq!(apply_calibration(&src, &CalibrationMap::identity(2)).unwrap(), src);
        let mut m = EmbeddingMatrix::new(2);
        m.insert(n(0), &[1.0, 1.0], Some(&[7.0, 7.0]));
        let scale = CalibrationMap::new(2, vec![2.0, 0.0, 0.0, 2.0], vec![0.0, 0.0]).unwrap();
        let out = apply_calibration(&m, &scale).unwrap();
        assert_eq!(out.input(n(0)).unwrap(), &[2.0, 2.0]);
        assert_eq!(out.context(n(0)).unwrap(), &[7.0, 7.0]);
        assert_eq!(m.input(n(0)).unwrap(), &[1.0, 1.0]);
        assert!(apply_calibration(&random_matrix(2, 3, 1), &scale).is_err());
    }

    #[test]
    fn map_serialization() {
        let src = random_matrix(30, 3, 8);
        let tgt = random_matrix(30, 3, 9);
        let map = fit_calibration(&src, &tgt, src.nodes(), 1e-2, true).unwrap();
        let mut buf = Vec::new();
        map.write_binary(&mut buf).unwrap();
        let back = CalibrationMap::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.matrix(), map.matrix());
        assert_eq!(back.intercept(), map.intercept());

        let mut text = Vec::new();
        map.write_text(&mut text).unwrap();
        let s = String::from_utf8(text.clone()).unwrap();
        assert!(s.starts_with("4 3\n0 "));
        assert!(s.lines().last().unwrap().starts_with("intercept "));
        let back = CalibrationMap::read_text(text.as_slice()).unwrap();
        for (a, b) in back.matrix().iter().zip(map.matrix()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-9));
        }
    }

    #[test]
    fn reference_count_sweep_prefers_clean_nodes() {
        // First 40 ranked nodes follow an exact linear map; the rest are noise.
        let src = random_matrix(100, 4, 10);
        let r = random_orthogonal(4, 11);
        let mut tgt = map_rows(&src, &r, &[0.0; 4]);
        let noise = random_matrix(100, 4, 12);
        for i in 40..100 {
            tgt.insert(n(i), noise.input(n(i)).unwrap(), None);
        }
        let ranked = ReferenceSet {
            nodes: (0..100).map(n).collect(),
            scores: (0..100).map(f64::from).collect(),
        };
        let best = choose_reference_count(&ranked, &[20, 40, 100], &src, &tgt, 1e-3, true).unwrap();
        assert!(best == 20 || best == 40, "{best}");
        assert_eq!(default_reference_count(128, 113), 384);
        assert_eq!(default_reference_count(2, 1000), 100);
    }
}
