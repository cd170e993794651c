//! End-to-end runs: embed each snapshot, calibrate it onto its predecessor,
//! estimate the combination weights, combine, and evaluate link prediction
//! against an embedding trained on the whole training history.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    apply_calibration, choose_reference_count, default_reference_count, fit_calibration, select_reference_nodes,
    temporal_degrees, CalibrationMap, Centrality, ReferenceSet,
};
use crate::combiner::{combine_generalized, AlphaVector, CombinedEmbedding};
use crate::embedding::{EmbeddingMatrix, NodeVectors};
use crate::error::{IcmenError, Result};
use crate::estimator::{
    build_counting_task, build_prior, collect_class_counts, grid_search_alpha, map_estimate, AlphaGrid, ClassCounts,
    PriorStrategy,
};
use crate::evaluation::{
    count_non_edges, evaluate_link_prediction, sample_negative_edges, unique_pairs, ClassifierConfig, EdgeSet,
    LinkTask,
};
use crate::graph::{
    chronological_split, make_snapshots, parse_edge_list, Delimiter, FormatSpec, NodeId, NodeRegistry, Snapshot,
    SnapshotMode, TemporalEdgeList,
};
use crate::rng::derive_seed;
use crate::skipgram::{
    build_training_pairs, build_unigram_table, train_sgns, warm_start_reference_nodes, TrainConfig, TrainMode,
    DEFAULT_NEGATIVE_EXPONENT,
};
use crate::walks::{generate_static_walks, generate_temporal_walks, WalkConfig, WalkCorpus};

const WALK_STREAM: u64 = 100;
const TRAIN_STREAM: u64 = 200;
const INIT_STREAM: u64 = 300;
const COUNT_STREAM: u64 = 400;
const EVAL_STREAM: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseMethod {
    #[default]
    StaticWalk,
    TemporalWalk,
}

impl BaseMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::StaticWalk => "static-walk",
            Self::TemporalWalk => "temporal-walk",
        }
    }
}

impl FromStr for BaseMethod {
    type Err = IcmenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static-walk" => Ok(Self::StaticWalk),
            "temporal-walk" => Ok(Self::TemporalWalk),
            other => Err(IcmenError::InvalidArgument(format!(
                "unknown method `{other}` (expected static-walk or temporal-walk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaStrategy {
    Fixed,
    Grid,
    DirichletUniform,
    #[default]
    DirichletIncreasing,
}

impl AlphaStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::Grid => "grid",
            Self::DirichletUniform => "dirichlet-uniform",
            Self::DirichletIncreasing => "dirichlet-increasing",
        }
    }
}

impl FromStr for AlphaStrategy {
    type Err = IcmenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "grid" => Ok(Self::Grid),
            "dirichlet-uniform" => Ok(Self::DirichletUniform),
            "dirichlet-increasing" => Ok(Self::DirichletIncreasing),
            other => Err(IcmenError::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Where the edge list lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub path: PathBuf,
    /// `whitespace`, `tab`, or a single character.
    pub delimiter: String,
    pub src_col: usize,
    pub dst_col: usize,
    pub time_col: usize,
    pub directed: bool,
    pub comment_prefixes: Vec<String>,
}

impl Default for InputConfig {
    fn default() -> Self {
        let f = FormatSpec::default();
        Self {
            path: PathBuf::new(),
            delimiter: "whitespace".into(),
            src_col: f.src_col,
            dst_col: f.dst_col,
            time_col: f.time_col.unwrap_or(2),
            directed: f.directed,
            comment_prefixes: f.comment_prefixes,
        }
    }
}

pub fn parse_delimiter(s: &str) -> Result<Delimiter> {
    match s {
        "whitespace" | "ws" => Ok(Delimiter::Whitespace),
        "tab" | "\\t" => Ok(Delimiter::Char('\t')),
        "comma" => Ok(Delimiter::Char(',')),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(Delimiter::Char(c)),
                _ => Err(IcmenError::InvalidArgument(format!("unsupported delimiter `{s}`"))),
            }
        }
    }
}

impl InputConfig {
    pub fn format(&self) -> Result<FormatSpec> {
        Ok(FormatSpec {
            delimiter: parse_delimiter(&self.delimiter)?,
            src_col: self.src_col,
            dst_col: self.dst_col,
            time_col: Some(self.time_col),
            comment_prefixes: self.comment_prefixes.clone(),
            directed: self.directed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Reference counts to try; empty means `max(3d, 10% of common nodes)`.
    /// With several values the one with the lowest held-out residual wins.
    pub ref_count: Vec<usize>,
    pub lambda: f64,
    pub intercept: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            ref_count: Vec::new(),
            lambda: 1e-3,
            intercept: true,
        }
    }
}

/// Everything a run needs. Walk and train seeds inside `walk` / `train` are
/// ignored; all streams derive from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: Option<String>,
    pub method: BaseMethod,
    pub splits: usize,
    /// Number of embeddings combined; defaults to `splits`.
    pub k: Option<usize>,
    pub strategy: AlphaStrategy,
    /// Fixed weights: `k` values, or one value `a` meaning `(a, 1 - a)` when `k = 2`.
    pub alpha: Vec<f64>,
    /// Candidate weights on the older embedding when `k = 2`; empty means 0.0..=1.0 by 0.1.
    pub grid: Vec<f64>,
    /// Simplex resolution for grid search when `k > 2`.
    pub grid_steps: usize,
    pub train_fraction: f64,
    /// Chronological split inside the last snapshot for weight estimation.
    pub estimate_split: f64,
    pub snapshot_mode: SnapshotMode,
    pub reps: usize,
    pub seed: u64,
    pub deterministic: bool,
    /// Worker threads for skip-gram training when not deterministic.
    pub workers: Option<usize>,
    pub baseline_only: bool,
    /// Also train and evaluate the whole-history embedding.
    pub compare_baseline: bool,
    pub out: Option<PathBuf>,
    pub input: InputConfig,
    pub walk: WalkConfig,
    pub train: TrainConfig,
    pub calibration: CalibrationConfig,
    pub classifier: ClassifierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            method: BaseMethod::default(),
            splits: 3,
            k: None,
            strategy: AlphaStrategy::default(),
            alpha: Vec::new(),
            grid: Vec::new(),
            grid_steps: 4,
            train_fraction: 0.75,
            estimate_split: 0.75,
            snapshot_mode: SnapshotMode::default(),
            reps: 1,
            seed: 0,
            deterministic: false,
            workers: None,
            baseline_only: false,
            compare_baseline: false,
            out: None,
            input: InputConfig::default(),
            walk: WalkConfig::default(),
            train: TrainConfig::default(),
            calibration: CalibrationConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IcmenError::Format(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| IcmenError::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| IcmenError::io_at(path, e))?;
        Self::from_toml(&text)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(self.splits)
    }

    pub fn train_mode(&self) -> TrainMode {
        if self.deterministic {
            TrainMode::Deterministic
        } else {
            TrainMode::Parallel {
                workers: self.workers.unwrap_or_else(rayon::current_num_threads),
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.splits < 2 {
            return Err(IcmenError::InvalidArgument(format!("splits must be >= 2, got {}", self.splits)));
        }
        let k = self.k();
        if k < 2 || k > self.splits {
            return Err(IcmenError::InvalidArgument(format!("k must be in 2..={}, got {k}", self.splits)));
        }
        if self.reps == 0 {
            return Err(IcmenError::InvalidArgument("reps must be >= 1".into()));
        }
        for (name, f) in [("train_fraction", self.train_fraction), ("estimate_split", self.estimate_split)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(IcmenError::InvalidArgument(format!("{name} must be in (0, 1), got {f}")));
            }
        }
        if self.calibration.lambda < 0.0 || !self.calibration.lambda.is_finite() {
            return Err(IcmenError::InvalidArgument("ridge lambda must be >= 0".into()));
        }
        if self.calibration.ref_count.contains(&0) {
            return Err(IcmenError::InvalidArgument("reference counts must be >= 1".into()));
        }
        if self.strategy == AlphaStrategy::Fixed {
            self.fixed_alpha()?;
        }
        if self.strategy == AlphaStrategy::Grid && k > 2 && self.grid_steps == 0 {
            return Err(IcmenError::InvalidArgument("grid_steps must be >= 1".into()));
        }
        self.walk.validate()?;
        self.train.validate()?;
        self.classifier.validate()?;
        self.input.format()?;
        Ok(())
    }

    pub fn fixed_alpha(&self) -> Result<AlphaVector> {
        let k = self.k();
        match self.alpha.as_slice() {
            [a] if k == 2 => AlphaVector::pair(*a),
            v if v.len() == k => AlphaVector::new(v.to_vec()),
            v => Err(IcmenError::InvalidArgument(format!(
                "fixed strategy needs {k} alpha values (or one when k = 2), got {}",
                v.len()
            ))),
        }
    }

    fn alpha_grid(&self) -> Result<AlphaGrid> {
        let k = self.k();
        if k == 2 {
            if self.grid.is_empty() {
                Ok(AlphaGrid::default_basic())
            } else {
                AlphaGrid::basic(&self.grid)
            }
        } else {
            AlphaGrid::simplex(k, self.grid_steps)
        }
    }

    fn prior_strategy(&self) -> Option<PriorStrategy> {
        match self.strategy {
            AlphaStrategy::DirichletUniform => Some(PriorStrategy::Uniform),
            AlphaStrategy::DirichletIncreasing => Some(PriorStrategy::Increasing),
            _ => None,
        }
    }
}

/// A parsed, time-sorted dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub registry: NodeRegistry,
    pub edges: TemporalEdgeList,
}

impl Dataset {
    pub fn new(name: impl Into<String>, registry: NodeRegistry, edges: TemporalEdgeList) -> Self {
        let edges = if edges.is_time_sorted() { edges } else { edges.sorted_by_time() };
        Self {
            name: name.into(),
            registry,
            edges,
        }
    }

    pub fn load(input: &InputConfig, name: Option<&str>) -> Result<Self> {
        let file = File::open(&input.path).map_err(|e| IcmenError::io_at(&input.path, e))?;
        let parsed = parse_edge_list(BufReader::new(file), &input.format()?)?;
        let name = name.map(str::to_string).unwrap_or_else(|| {
            input
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        });
        Ok(Self::new(name, parsed.registry, parsed.edges))
    }
}

/// Supplies snapshots one at a time, oldest first.
pub trait SnapshotSource {
    fn len(&self) -> usize;
    fn fetch(&mut self, t: usize) -> Result<Snapshot>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Snapshots cut from an in-memory event list.
pub struct SplitSource {
    snapshots: Vec<Option<Snapshot>>,
}

impl SplitSource {
    pub fn new(train: &TemporalEdgeList, n: usize, mode: SnapshotMode) -> Result<Self> {
        Ok(Self {
            snapshots: make_snapshots(train, n, mode)?.into_iter().map(Some).collect(),
        })
    }
}

impl SnapshotSource for SplitSource {
    fn len(&self) -> usize {
        self.snapshots.len()
    }

    /// Hands out each snapshot once; it is not kept afterwards.
    fn fetch(&mut self, t: usize) -> Result<Snapshot> {
        self.snapshots
            .get_mut(t)
            .and_then(Option::take)
            .ok_or_else(|| IcmenError::InvalidArgument(format!("snapshot {t} is unavailable")))
    }
}

/// What happened while absorbing one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub period: usize,
    pub events: usize,
    pub nodes: usize,
    pub walks: usize,
    pub references: usize,
    pub calibrated: bool,
    pub calibration_residual: Option<f64>,
}

/// Running state of the incremental procedure. Only derived quantities of
/// past snapshots are retained (their embeddings and node degrees), never
/// their events.
pub struct IncrementalState {
    method: BaseMethod,
    walk: WalkConfig,
    train: TrainConfig,
    calibration: CalibrationConfig,
    mode: TrainMode,
    seed: u64,
    prev_degrees: Option<Centrality>,
    raw: Vec<EmbeddingMatrix>,
    maps: Vec<CalibrationMap>,
    calibrated: Vec<EmbeddingMatrix>,
    records: Vec<SnapshotRecord>,
}

/// Output of the embedding half of a step, before calibration.
pub struct EmbeddedSnapshot {
    pub raw: EmbeddingMatrix,
    pub refs: ReferenceSet,
    pub degrees: Centrality,
    pub walks: usize,
}

impl IncrementalState {
    pub fn new(cfg: &RunConfig, seed: u64) -> Self {
        Self {
            method: cfg.method,
            walk: cfg.walk.clone(),
            train: cfg.train.clone(),
            calibration: cfg.calibration.clone(),
            mode: cfg.train_mode(),
            seed,
            prev_degrees: None,
            raw: Vec::new(),
            maps: Vec::new(),
            calibrated: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.calibrated.len()
    }

    pub fn calibrated(&self) -> &[EmbeddingMatrix] {
        &self.calibrated
    }

    pub fn raw(&self) -> &[EmbeddingMatrix] {
        &self.raw
    }

    pub fn maps(&self) -> &[CalibrationMap] {
        &self.maps
    }

    pub fn records(&self) -> &[SnapshotRecord] {
        &self.records
    }

    fn reference_set(&self, degrees: &Centrality) -> Option<ReferenceSet> {
        let prev = self.prev_degrees.as_ref()?;
        let common = degrees.keys().filter(|n| prev.contains_key(n)).count();
        if common == 0 {
            warn!("no node is shared with the previous snapshot; calibration is impossible");
            return None;
        }
        // rank every common node; truncation happens once the count is known
        match select_reference_nodes(prev, degrees, common) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("reference selection failed: {e}");
                None
            }
        }
    }

    fn default_count(&self, ranked: &ReferenceSet) -> usize {
        match self.calibration.ref_count.as_slice() {
            [] => default_reference_count(self.train.dim, ranked.len()),
            [n] => *n,
            // warm-start with the largest candidate; the sweep picks a prefix later
            many => many.iter().copied().max().unwrap_or(1),
        }
    }

    /// Trains the raw embedding of `snapshot`, warm-starting the reference
    /// nodes from the previous calibrated embedding.
    pub fn embed(&self, snapshot: &Snapshot) -> Result<EmbeddedSnapshot> {
        let t = self.steps() as u64 + 1;
        let degrees = temporal_degrees(snapshot);
        let refs = self
            .reference_set(&degrees)
            .map(|r| {
                let n = self.default_count(&r);
                if n > r.len() {
                    warn!("requested {n} reference nodes but only {} common nodes exist", r.len());
                }
                r.truncated(n)
            })
            .unwrap_or_default();
        let raw = embed_snapshot(
            snapshot,
            self.method,
            &self.walk,
            &self.train,
            self.mode,
            self.calibrated.last().map(|prev| (prev, refs.nodes.as_slice())),
            derive_seed(self.seed, t),
        )?;
        Ok(EmbeddedSnapshot {
            raw: raw.0,
            refs,
            degrees,
            walks: raw.1,
        })
    }

    /// Calibrates an embedded snapshot onto the previous calibrated embedding
    /// and appends it.
    pub fn absorb(&mut self, snapshot: &Snapshot, embedded: EmbeddedSnapshot) -> Result<()> {
        let EmbeddedSnapshot {
            raw,
            refs,
            degrees,
            walks,
        } = embedded;
        let (map, residual) = match self.calibrated.last() {
            None => (CalibrationMap::identity(raw.dim()), None),
            Some(prev) => match self.fit(&raw, prev, &refs) {
                Ok((map, residual)) => (map, Some(residual)),
                Err(e) => {
                    warn!(
                        "snapshot {}: calibration failed ({e}); folding it in WITHOUT calibration",
                        snapshot.period()
                    );
                    (CalibrationMap::identity(raw.dim()), None)
                }
            },
        };
        let calibrated = apply_calibration(&raw, &map)?;
        self.records.push(SnapshotRecord {
            period: snapshot.period(),
            events: snapshot.edges().len(),
            nodes: snapshot.nodes().len(),
            walks,
            references: refs.len(),
            calibrated: residual.is_some(),
            calibration_residual: residual,
        });
        self.raw.push(raw);
        self.maps.push(map);
        self.calibrated.push(calibrated);
        self.prev_degrees = Some(degrees);
        Ok(())
    }

    fn fit(&self, raw: &EmbeddingMatrix, prev: &EmbeddingMatrix, refs: &ReferenceSet) -> Result<(CalibrationMap, f64)> {
        if refs.is_empty() {
            return Err(IcmenError::InsufficientData("no reference nodes".into()));
        }
        let cal = &self.calibration;
        let refs = if cal.ref_count.len() > 1 {
            let n = choose_reference_count(refs, &cal.ref_count, raw, prev, cal.lambda, cal.intercept)?;
            refs.truncated(n)
        } else {
            refs.clone()
        };
        let map = fit_calibration(raw, prev, &refs.nodes, cal.lambda, cal.intercept)?;
        let residual = map.residual(raw, prev, &refs.nodes)?;
        Ok((map, residual))
    }

    pub fn step(&mut self, snapshot: &Snapshot) -> Result<()> {
        let e = self.embed(snapshot)?;
        self.absorb(snapshot, e)
    }
}

/// Walks, warm start and skip-gram for one snapshot. Returns the matrix and
/// the number of walks. Every snapshot node gets a row even when no walk
/// reaches it.
fn embed_snapshot(
    snapshot: &Snapshot,
    method: BaseMethod,
    walk: &WalkConfig,
    train: &TrainConfig,
    mode: TrainMode,
    warm: Option<(&EmbeddingMatrix, &[NodeId])>,
    seed: u64,
) -> Result<(EmbeddingMatrix, usize)> {
    let walk_cfg = WalkConfig {
        seed: derive_seed(seed, WALK_STREAM),
        ..walk.clone()
    };
    let corpus: WalkCorpus = match method {
        BaseMethod::StaticWalk => generate_static_walks(snapshot, &walk_cfg)?,
        BaseMethod::TemporalWalk => generate_temporal_walks(snapshot, &walk_cfg)?,
    };
    let mut init = EmbeddingMatrix::random(train.dim, snapshot.nodes(), derive_seed(seed, INIT_STREAM));
    let refs: &[NodeId] = warm.map_or(&[], |w| w.1);
    if let Some((prev, refs)) = warm {
        init = warm_start_reference_nodes(init, prev, refs)?;
    }
    let pairs = build_training_pairs(&corpus, train.window);
    if pairs.is_empty() {
        warn!(
            "snapshot {}: walk corpus yields no training pairs; keeping initial vectors",
            snapshot.period()
        );
        return Ok((init, corpus.len()));
    }
    let table = build_unigram_table(&corpus, refs, walk.walks_per_node, DEFAULT_NEGATIVE_EXPONENT)?;
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, TRAIN_STREAM),
        ..train.clone()
    };
    let m = train_sgns(&pairs, init, &table, &train_cfg, mode)?;
    Ok((m, corpus.len()))
}

/// Embeds the whole training history as one graph.
pub fn embed_full_history(train: &TemporalEdgeList, cfg: &RunConfig, seed: u64) -> Result<EmbeddingMatrix> {
    let snapshot = Snapshot::from_edges(0, train.edges().to_vec(), train.is_directed());
    embed_snapshot(
        &snapshot,
        cfg.method,
        &cfg.walk,
        &cfg.train,
        cfg.train_mode(),
        None,
        derive_seed(seed, 0),
    )
    .map(|r| r.0)
}

/// The `k` embeddings to combine. With fewer slots than snapshots, the oldest
/// slot holds the equal-weight combination of the leading snapshots.
pub fn estimation_sequence(calibrated: &[EmbeddingMatrix], k: usize) -> Result<Vec<EmbeddingMatrix>> {
    let n = calibrated.len();
    if k < 1 || k > n {
        return Err(IcmenError::InvalidArgument(format!("cannot form {k} slots from {n} embeddings")));
    }
    let head = n - k + 1;
    let mut seq = Vec::with_capacity(k);
    if head == 1 {
        seq.push(calibrated[0].clone());
    } else {
        let prefix: Vec<&EmbeddingMatrix> = calibrated[..head].iter().collect();
        seq.push(combine_generalized(&prefix, &AlphaVector::uniform(head))?.to_matrix());
    }
    seq.extend(calibrated[head..].iter().cloned());
    Ok(seq)
}

/// Estimated weights and the evidence behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRecord {
    pub strategy: AlphaStrategy,
    pub k: usize,
    pub alpha: Vec<f64>,
    pub beta: Option<Vec<f64>>,
    #[serde(rename = "D")]
    pub counts: Option<Vec<u64>>,
    pub grid_score: Option<f64>,
}

/// Chooses the weights for `seq` using the last snapshot as evidence.
pub fn estimate_alpha(seq: &[EmbeddingMatrix], last: &Snapshot, cfg: &RunConfig, seed: u64) -> Result<AlphaRecord> {
    let k = seq.len();
    let mut record = AlphaRecord {
        strategy: cfg.strategy,
        k,
        alpha: Vec::new(),
        beta: None,
        counts: None,
        grid_score: None,
    };
    let count_seed = derive_seed(seed, COUNT_STREAM);
    match cfg.strategy {
        AlphaStrategy::Fixed => record.alpha = cfg.fixed_alpha()?.into(),
        AlphaStrategy::Grid => {
            let task = build_counting_task(seq, last, cfg.estimate_split, derive_seed(count_seed, 1))?;
            let (alpha, score) = grid_search_alpha(&cfg.alpha_grid()?, |a| {
                let combined = combine_generalized(seq, a)?;
                Ok(evaluate_link_prediction(&combined, &task, &cfg.classifier)?.auc)
            })?;
            record.alpha = alpha.into();
            record.grid_score = Some(score);
        }
        AlphaStrategy::DirichletUniform | AlphaStrategy::DirichletIncreasing => {
            let prior = build_prior(k, cfg.prior_strategy().expect("dirichlet strategy"))?;
            let counts: ClassCounts = collect_class_counts(seq, last, cfg.estimate_split, &cfg.classifier, count_seed)?;
            record.alpha = map_estimate(&counts, &prior)?.into();
            record.beta = Some(prior.beta().to_vec());
            record.counts = Some(counts.0);
        }
    }
    Ok(record)
}

/// Checks that every node of every increment has exactly one combined row.
pub fn verify_coverage<V: NodeVectors>(increment_nodes: &[Vec<NodeId>], combined: &V) -> Result<()> {
    let mut ids = combined.node_ids().to_vec();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(IcmenError::InvalidArgument("combined embedding has duplicate rows".into()));
    }
    for nodes in increment_nodes {
        for &n in nodes {
            if ids.binary_search(&n).is_err() {
                return Err(IcmenError::MissingNode(n));
            }
        }
    }
    Ok(())
}

/// Held-out link prediction data shared by the incremental and full runs.
#[derive(Debug, Clone)]
pub struct EvaluationData {
    pub task: LinkTask,
    /// Distinct test pairs before dropping those with unseen endpoints.
    pub test_pairs: usize,
}

impl EvaluationData {
    pub fn coverage(&self) -> f64 {
        if self.test_pairs == 0 {
            0.0
        } else {
            self.task.test_positive.len() as f64 / self.test_pairs as f64
        }
    }
}

/// Positives are distinct train / test pairs; negatives avoid every event of
/// the dataset and are drawn among training nodes. Test pairs touching nodes
/// never seen in training are excluded.
pub fn build_evaluation_data(
    all: &TemporalEdgeList,
    train: &TemporalEdgeList,
    test: &TemporalEdgeList,
    seed: u64,
) -> Result<EvaluationData> {
    let directed = all.is_directed();
    let known = EdgeSet::from_edges(all.edges(), directed);
    let nodes = train.nodes();
    let seen: std::collections::HashSet<NodeId> = nodes.iter().copied().collect();
    let train_positive = unique_pairs(train.edges(), directed);
    let all_test = unique_pairs(test.edges(), directed);
    let test_pairs = all_test.len();
    let test_positive: Vec<_> = all_test
        .into_iter()
        .filter(|(u, v)| seen.contains(u) && seen.contains(v))
        .collect();
    if test_positive.is_empty() {
        return Err(IcmenError::InsufficientData("no test pair has both endpoints in the training data".into()));
    }
    let available = count_non_edges(&known, &nodes);
    if available < test_positive.len() + 1 {
        return Err(IcmenError::SamplingExhausted {
            attempts: 0,
            found: available,
            wanted: test_positive.len() + 1,
        });
    }
    let train_negatives = train_positive.len().min(available - test_positive.len());
    if train_negatives < train_positive.len() {
        warn!(
            "only {available} non-edges exist; training with {train_negatives} negatives for {} positives",
            train_positive.len()
        );
    }
    let negatives = sample_negative_edges(&known, &nodes, test_positive.len() + train_negatives, seed)?;
    let (test_negative, train_negative) = negatives.split_at(test_positive.len());
    Ok(EvaluationData {
        task: LinkTask {
            train_positive,
            train_negative: train_negative.to_vec(),
            test_positive,
            test_negative: test_negative.to_vec(),
        },
        test_pairs,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepTimings {
    pub embed_seconds: Vec<f64>,
    pub calibrate_seconds: Vec<f64>,
    pub estimate_seconds: f64,
    pub combine_seconds: f64,
    pub evaluate_seconds: f64,
    /// Embed + calibrate of the last snapshot, plus estimate and combine.
    pub incremental_step_seconds: f64,
    pub full_retrain_seconds: Option<f64>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub rep: usize,
    pub seed: u64,
    pub auc: Option<f64>,
    pub baseline_auc: Option<f64>,
    pub delta_auc: Option<f64>,
    pub alpha: Option<AlphaRecord>,
    pub coverage: f64,
    pub test_pairs: usize,
    pub scored_test_pairs: usize,
    pub combined_nodes: usize,
    pub snapshots: Vec<SnapshotRecord>,
    pub timings: Option<RepTimings>,
}

/// Everything one repetition produced, kept in memory for callers.
pub struct RepOutcome {
    pub metrics: RepMetrics,
    pub timings: RepTimings,
    pub combined: Option<CombinedEmbedding>,
    pub baseline: Option<EmbeddingMatrix>,
    pub state: Option<IncrementalState>,
    pub train_nodes: Vec<Vec<NodeId>>,
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Output of [`run_incremental`].
pub struct IncrementalRun {
    pub state: IncrementalState,
    /// The newest snapshot, kept for estimating the weights.
    pub last: Snapshot,
    pub train_nodes: Vec<Vec<NodeId>>,
    pub embed_seconds: Vec<f64>,
    pub calibrate_seconds: Vec<f64>,
}

/// Embeds and calibrates every snapshot of `source`, oldest first. Each
/// snapshot is fetched once and dropped after it is absorbed, except the last.
pub fn run_incremental<S: SnapshotSource + ?Sized>(source: &mut S, cfg: &RunConfig, seed: u64) -> Result<IncrementalRun> {
    let mut state = IncrementalState::new(cfg, seed);
    let mut train_nodes = Vec::with_capacity(source.len());
    let mut embed_seconds = Vec::with_capacity(source.len());
    let mut calibrate_seconds = Vec::with_capacity(source.len());
    let mut last = None;
    for t in 0..source.len() {
        let snapshot = source.fetch(t)?;
        let start = Instant::now();
        let embedded = state.embed(&snapshot)?;
        embed_seconds.push(seconds(start));
        let start = Instant::now();
        state.absorb(&snapshot, embedded)?;
        calibrate_seconds.push(seconds(start));
        train_nodes.push(snapshot.nodes().to_vec());
        last = Some(snapshot);
    }
    let last = last.ok_or_else(|| IcmenError::InsufficientData("the snapshot source is empty".into()))?;
    Ok(IncrementalRun {
        state,
        last,
        train_nodes,
        embed_seconds,
        calibrate_seconds,
    })
}

/// Runs one repetition without touching the filesystem.
pub fn run_repetition(data: &Dataset, cfg: &RunConfig, rep: usize) -> Result<RepOutcome> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, rep as u64);
    let split = chronological_split(&data.edges, cfg.train_fraction)?;
    let eval = build_evaluation_data(&data.edges, &split.train, &split.test, derive_seed(seed, EVAL_STREAM))?;
    let mut timings = RepTimings::default();
    let mut metrics = RepMetrics {
        rep,
        seed,
        auc: None,
        baseline_auc: None,
        delta_auc: None,
        alpha: None,
        coverage: eval.coverage(),
        test_pairs: eval.test_pairs,
        scored_test_pairs: 0,
        combined_nodes: 0,
        snapshots: Vec::new(),
        timings: None,
    };
    let mut outcome_combined = None;
    let mut outcome_state = None;
    let mut train_nodes = Vec::new();

    if !cfg.baseline_only {
        let mut source = SplitSource::new(&split.train, cfg.splits, cfg.snapshot_mode)?;
        let run = run_incremental(&mut source, cfg, seed)?;
        timings.embed_seconds = run.embed_seconds;
        timings.calibrate_seconds = run.calibrate_seconds;
        train_nodes = run.train_nodes;
        let (state, last) = (run.state, run.last);

        let start = Instant::now();
        let seq = estimation_sequence(state.calibrated(), cfg.k())?;
        let alpha = estimate_alpha(&seq, &last, cfg, seed)?;
        timings.estimate_seconds = seconds(start);
        info!("rep {rep}: alpha = {:?}", alpha.alpha);

        let start = Instant::now();
        let combined = combine_generalized(&seq, &AlphaVector::new(alpha.alpha.clone())?)?;
        timings.combine_seconds = seconds(start);
        drop(seq);
        verify_coverage(&train_nodes, &combined)?;

        timings.incremental_step_seconds = timings.embed_seconds.last().copied().unwrap_or(0.0)
            + timings.calibrate_seconds.last().copied().unwrap_or(0.0)
            + timings.estimate_seconds
            + timings.combine_seconds;

        let start = Instant::now();
        let result = evaluate_link_prediction(&combined, &eval.task, &cfg.classifier)?;
        timings.evaluate_seconds = seconds(start);
        metrics.auc = Some(result.auc);
        metrics.scored_test_pairs = result.scored / 2;
        metrics.combined_nodes = combined.len();
        metrics.alpha = Some(alpha);
        metrics.snapshots = state.records().to_vec();
        outcome_combined = Some(combined);
        outcome_state = Some(state);
    }

    let mut baseline = None;
    if cfg.baseline_only || cfg.compare_baseline {
        let start = Instant::now();
        let full = embed_full_history(&split.train, cfg, seed)?;
        let elapsed = seconds(start);
        timings.full_retrain_seconds = Some(elapsed);
        if !cfg.baseline_only && timings.incremental_step_seconds > 0.0 {
            timings.speedup = Some(elapsed / timings.incremental_step_seconds);
        }
        let result = evaluate_link_prediction(&full, &eval.task, &cfg.classifier)?;
        metrics.baseline_auc = Some(result.auc);
        if cfg.baseline_only {
            metrics.scored_test_pairs = result.scored / 2;
            metrics.combined_nodes = full.len();
        }
        metrics.delta_auc = metrics.auc.map(|a| a - result.auc);
        baseline = Some(full);
    }
    metrics.timings = Some(timings.clone());
    Ok(RepOutcome {
        metrics,
        timings,
        combined: outcome_combined,
        baseline,
        state: outcome_state,
        train_nodes,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellTimings {
    pub incremental_step_mean: f64,
    pub full_retrain_mean: Option<f64>,
    pub speedup_mean: Option<f64>,
}

/// Aggregate over the repetitions of one (dataset, method, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub dataset: String,
    pub base_method: BaseMethod,
    pub n: usize,
    pub k: usize,
    pub strategy: AlphaStrategy,
    /// Mean of the per-repetition weights.
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    /// Class counts summed over repetitions.
    #[serde(rename = "D")]
    pub counts: Option<Vec<u64>>,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub baseline_auc_mean: Option<f64>,
    pub baseline_auc_std: Option<f64>,
    pub delta_auc: Option<f64>,
    pub coverage_mean: f64,
    pub reps: Vec<RepMetrics>,
    pub timings: Option<CellTimings>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

fn aggregate(data: &Dataset, cfg: &RunConfig, reps: Vec<RepMetrics>, timings: &[RepTimings]) -> CellMetrics {
    let aucs: Vec<f64> = reps.iter().filter_map(|r| r.auc).collect();
    let base: Vec<f64> = reps.iter().filter_map(|r| r.baseline_auc).collect();
    let alphas: Vec<&AlphaRecord> = reps.iter().filter_map(|r| r.alpha.as_ref()).collect();
    let alpha = (!alphas.is_empty()).then(|| {
        let k = alphas[0].alpha.len();
        (0..k)
            .map(|i| alphas.iter().map(|a| a.alpha[i]).sum::<f64>() / alphas.len() as f64)
            .collect()
    });
    let counts = alphas.iter().filter_map(|a| a.counts.as_ref()).fold(None, |acc: Option<Vec<u64>>, c| {
        Some(match acc {
            None => c.clone(),
            Some(a) => a.iter().zip(c).map(|(x, y)| x + y).collect(),
        })
    });
    let auc = mean_std(&aucs);
    let baseline = mean_std(&base);
    let full: Vec<f64> = timings.iter().filter_map(|t| t.full_retrain_seconds).collect();
    let speed: Vec<f64> = timings.iter().filter_map(|t| t.speedup).collect();
    CellMetrics {
        dataset: data.name.clone(),
        base_method: cfg.method,
        n: cfg.splits,
        k: cfg.k(),
        strategy: cfg.strategy,
        alpha,
        beta: alphas.first().and_then(|a| a.beta.clone()),
        counts,
        auc_mean: auc.map(|a| a.0),
        auc_std: auc.map(|a| a.1),
        baseline_auc_mean: baseline.map(|b| b.0),
        baseline_auc_std: baseline.map(|b| b.1),
        delta_auc: auc.zip(baseline).map(|(a, b)| a.0 - b.0),
        coverage_mean: mean_std(&reps.iter().map(|r| r.coverage).collect::<Vec<_>>()).map_or(0.0, |m| m.0),
        reps,
        timings: Some(CellTimings {
            incremental_step_mean: mean_std(&timings.iter().map(|t| t.incremental_step_seconds).collect::<Vec<_>>())
                .map_or(0.0, |m| m.0),
            full_retrain_mean: mean_std(&full).map(|m| m.0),
            speedup_mean: mean_std(&speed).map(|m| m.0),
        }),
    }
}

/// `<out>/<dataset>/<method>/n=<n>`.
pub fn cell_dir(out: &Path, dataset: &str, cfg: &RunConfig) -> PathBuf {
    out.join(dataset).join(cfg.method.as_str()).join(format!("n={}", cfg.splits))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| IcmenError::io_at(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IcmenError::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_rep_artifacts(dir: &Path, data: &Dataset, outcome: &RepOutcome, deterministic: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| IcmenError::io_at(dir, e))?;
    let reg = &data.registry;
    if let Some(state) = &outcome.state {
        for (i, (raw, map)) in state.raw().iter().zip(state.maps()).enumerate() {
            let t = i + 1;
            raw.write_text(reg, create(&dir.join(format!("snapshot_{t}.emb")))?)?;
            raw.write_binary(reg, create(&dir.join(format!("snapshot_{t}.bin")))?)?;
            map.write_text(create(&dir.join(format!("calibration_{t}.map")))?)?;
            map.write_binary(create(&dir.join(format!("calibration_{t}.bin")))?)?;
        }
    }
    if let Some(alpha) = &outcome.metrics.alpha {
        write_json(&dir.join("alpha.json"), alpha)?;
    }
    if let Some(c) = &outcome.combined {
        let m = c.to_matrix();
        m.write_text(reg, create(&dir.join("combined.emb"))?)?;
        m.write_binary(reg, create(&dir.join("combined.bin"))?)?;
        c.write_availability_csv(reg, create(&dir.join("availability.csv"))?)?;
    }
    if let Some(b) = &outcome.baseline {
        b.write_text(reg, create(&dir.join("baseline.emb"))?)?;
    }
    let mut metrics = outcome.metrics.clone();
    if deterministic {
        metrics.timings = None;
        write_json(&dir.join("timings.json"), &outcome.timings)?;
    }
    write_json(&dir.join("metrics.json"), &metrics)
}

/// Result of [`run_on_dataset`].
pub struct RunReport {
    pub cell_dir: Option<PathBuf>,
    pub metrics: CellMetrics,
    pub outcomes: Vec<RepOutcome>,
}

/// Runs every repetition of `cfg` on `data` and writes artifacts under
/// `cfg.out` when set. On failure a `FAILED` marker with the error is left
/// next to whatever was written.
pub fn run_on_dataset(data: &Dataset, cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.out.as_ref().map(|out| cell_dir(out, &data.name, cfg));
    if let Some(dir) = &dir {
        fs::create_dir_all(dir).map_err(|e| IcmenError::io_at(dir, e))?;
        let _ = fs::remove_file(dir.join("FAILED"));
        fs::write(dir.join("config.toml"), cfg.to_toml()?).map_err(|e| IcmenError::io_at(dir, e))?;
    }
    let result = run_cell(data, cfg, dir.as_deref());
    if let (Err(e), Some(dir)) = (&result, &dir) {
        let _ = fs::write(dir.join("FAILED"), format!("{e}\n"));
    }
    result
}

fn run_cell(data: &Dataset, cfg: &RunConfig, dir: Option<&Path>) -> Result<RunReport> {
    let mut outcomes = Vec::with_capacity(cfg.reps);
    for rep in 0..cfg.reps {
        info!("{} / {} / n={} / rep {rep}", data.name, cfg.method.as_str(), cfg.splits);
        let outcome = run_repetition(data, cfg, rep)?;
        if let Some(dir) = dir {
            write_rep_artifacts(&dir.join(format!("rep={rep}")), data, &outcome, cfg.deterministic)?;
        }
        outcomes.push(outcome);
    }
    let mut reps: Vec<RepMetrics> = outcomes.iter().map(|o| o.metrics.clone()).collect();
    let timings: Vec<RepTimings> = outcomes.iter().map(|o| o.timings.clone()).collect();
    if cfg.deterministic {
        for r in &mut reps {
            r.timings = None;
        }
    }
    let mut metrics = aggregate(data, cfg, reps, &timings);
    if let Some(dir) = dir {
        if cfg.deterministic {
            write_json(&dir.join("timings.json"), &metrics.timings)?;
            metrics.timings = None;
            write_json(&dir.join("metrics.json"), &metrics)?;
        } else {
            write_json(&dir.join("metrics.json"), &metrics)?;
        }
    }
    Ok(RunReport {
        cell_dir: dir.map(Path::to_path_buf),
        metrics,
        outcomes,
    })
}

/// Loads the configured dataset and runs it.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let data = Dataset::load(&cfg.input, cfg.dataset.as_deref())?;
    run_on_dataset(&data, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset: String,
    pub n: usize,
    pub auc_incremental: Option<f64>,
    pub auc_full: Option<f64>,
    pub delta_auc: Option<f64>,
    pub speedup: Option<f64>,
}

/// Runs the incremental procedure and the whole-history baseline with the
/// same settings.
pub fn compare_modes(data: &Dataset, cfg: &RunConfig) -> Result<(ComparisonReport, RunReport)> {
    let cfg = RunConfig {
        compare_baseline: true,
        ..cfg.clone()
    };
    let report = run_on_dataset(data, &cfg)?;
    let m = &report.metrics;
    let cmp = ComparisonReport {
        dataset: m.dataset.clone(),
        n: m.n,
        auc_incremental: m.auc_mean,
        auc_full: m.baseline_auc_mean,
        delta_auc: m.delta_auc,
        speedup: m.timings.as_ref().and_then(|t| t.speedup_mean),
    };
    Ok((cmp, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    Incremental,
    FullRetrain,
}

/// Wall-clock of one mode, parsing excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub mode: BenchMode,
    pub n: usize,
    pub seconds: f64,
    pub embed_seconds: f64,
    pub calibrate_seconds: f64,
    pub estimate_seconds: f64,
    pub combine_seconds: f64,
}

/// Times either the last incremental step (embed + calibrate the newest
/// snapshot, estimate, combine) or retraining on the whole history.
pub fn benchmark_pipeline(data: &Dataset, cfg: &RunConfig, mode: BenchMode) -> Result<TimingReport> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, 0);
    let split = chronological_split(&data.edges, cfg.train_fraction)?;
    let mut report = TimingReport {
        mode,
        n: cfg.splits,
        seconds: 0.0,
        embed_seconds: 0.0,
        calibrate_seconds: 0.0,
        estimate_seconds: 0.0,
        combine_seconds: 0.0,
    };
    match mode {
        BenchMode::FullRetrain => {
            let start = Instant::now();
            let m = embed_full_history(&split.train, cfg, seed)?;
            report.seconds = seconds(start);
            report.embed_seconds = report.seconds;
            drop(m);
        }
        BenchMode::Incremental => {
            let mut source = SplitSource::new(&split.train, cfg.splits, cfg.snapshot_mode)?;
            let mut state = IncrementalState::new(cfg, seed);
            for t in 0..source.len() - 1 {
                let s = source.fetch(t)?;
                state.step(&s)?;
            }
            let last = source.fetch(source.len() - 1)?;
            let start = Instant::now();
            let e = state.embed(&last)?;
            report.embed_seconds = seconds(start);
            let start = Instant::now();
            state.absorb(&last, e)?;
            report.calibrate_seconds = seconds(start);
            let start = Instant::now();
            let seq = estimation_sequence(state.calibrated(), cfg.k())?;
            let alpha = estimate_alpha(&seq, &last, cfg, seed)?;
            report.estimate_seconds = seconds(start);
            let start = Instant::now();
            let c = combine_generalized(&seq, &AlphaVector::new(alpha.alpha)?)?;
            report.combine_seconds = seconds(start);
            drop(c);
            report.seconds =
                report.embed_seconds + report.calibrate_seconds + report.estimate_seconds + report.combine_seconds;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub n: usize,
    pub incremental: TimingReport,
    pub full: TimingReport,
    /// Full-retrain time over incremental-step time.
    pub ratio: f64,
}

pub fn speedup_report(data: &Dataset, cfg: &RunConfig) -> Result<SpeedupReport> {
    let incremental = benchmark_pipeline(data, cfg, BenchMode::Incremental)?;
    let full = benchmark_pipeline(data, cfg, BenchMode::FullRetrain)?;
    Ok(SpeedupReport {
        n: cfg.splits,
        ratio: full.seconds / incremental.seconds.max(f64::MIN_POSITIVE),
        incremental,
        full,
    })
}

/// Flattens cell `metrics.json` files into CSV rows for plotting.
pub fn metrics_csv<W: Write>(cells: &[CellMetrics], mut out: W) -> Result<()> {
    writeln!(
        out,
        "dataset,base_method,n,k,strategy,alpha,beta,D,auc_mean,auc_std,baseline_auc_mean,baseline_auc_std,delta_auc,coverage_mean,incremental_step_mean,full_retrain_mean,speedup_mean"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let list = |v: Option<Vec<String>>| v.map(|x| x.join(" ")).unwrap_or_default();
    for c in cells {
        let t = c.timings.clone().unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.dataset,
            c.base_method.as_str(),
            c.n,
            c.k,
            c.strategy.as_str(),
            list(c.alpha.as_ref().map(|a| a.iter().map(f64::to_string).collect())),
            list(c.beta.as_ref().map(|a| a.iter().map(f64::to_string).collect())),
            list(c.counts.as_ref().map(|a| a.iter().map(u64::to_string).collect())),
            opt(c.auc_mean),
            opt(c.auc_std),
            opt(c.baseline_auc_mean),
            opt(c.baseline_auc_std),
            opt(c.delta_auc),
            c.coverage_mean,
            if c.timings.is_some() { t.incremental_step_mean.to_string() } else { String::new() },
            opt(t.full_retrain_mean),
            opt(t.speedup_mean),
        )?;
    }
    Ok(())
}

/// Reads every `metrics.json` that sits directly in a cell directory under `root`.
pub fn collect_cell_metrics(root: &Path) -> Result<Vec<CellMetrics>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| IcmenError::io_at(&dir, e))?;
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            if p.is_dir() {
                if !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("rep=")) {
                    stack.push(p);
                }
            } else if p.file_name().is_some_and(|n| n == "metrics.json") {
                let text = fs::read_to_string(&p).map_err(|e| IcmenError::io_at(&p, e))?;
                found.push(serde_json::from_str(&text).map_err(|e| IcmenError::Format(format!("{}: {e}", p.display())))?);
            }
        }
    }
    found.sort_by(|a: &CellMetrics, b| (&a.dataset, a.base_method.as_str(), a.n).cmp(&(&b.dataset, b.base_method.as_str(), b.n)));
    Ok(found)
}
