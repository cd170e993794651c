//! Temporal edge lists, the global node registry, chronological splits and
//! snapshot sequences.
//!
//! Node ids are dense `u32` indices handed out by a [`NodeRegistry`] in order of
//! first appearance, so re-parsing the same file always yields the same ids.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{IcmenError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijection between external node labels and dense internal ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeRegistry {
    labels: Vec<u64>,
    ids: HashMap<u64, NodeId>,
}

impl NodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, label: u64) -> NodeId {
        if let Some(&id) = self.ids.get(&label) {
            return id;
        }
        let id = NodeId(self.labels.len() as u32);
        self.labels.push(label);
        self.ids.insert(label, id);
        id
    }

    pub fn id(&self, label: u64) -> Option<NodeId> {
        self.ids.get(&label).copied()
    }

    pub fn label(&self, id: NodeId) -> Option<u64> {
        self.labels.get(id.index()).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in id order.
    pub fn labels(&self) -> &[u64] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: f64,
}

impl TemporalEdge {
    pub fn new(src: NodeId, dst: NodeId, timestamp: f64) -> Self {
        Self {
            src,
            dst,
            timestamp,
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.src == node || self.dst == node
    }
}

/// Time-stamped event stream. Events are kept in the order they were given;
/// duplicates are kept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemporalEdgeList {
    edges: Vec<TemporalEdge>,
    directed: bool,
}

impl TemporalEdgeList {
    pub fn new(edges: Vec<TemporalEdge>, directed: bool) -> Self {
        Self { edges, directed }
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn into_edges(self) -> Vec<TemporalEdge> {
        self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_time_sorted(&self) -> bool {
        self.edges
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp)
    }

    /// Stable sort by timestamp; events with equal timestamps keep file order.
    pub fn sorted_by_time(&self) -> TemporalEdgeList {
        let mut edges = self.edges.clone();
        edges.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        TemporalEdgeList::new(edges, self.directed)
    }

    /// Distinct nodes in ascending id order.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self.edges.iter().flat_map(|e| [e.src, e.dst]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delimiter {
    Whitespace,
    Char(char),
}

/// Describes the column layout of a temporal edge-list text file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub delimiter: Delimiter,
    pub src_col: usize,
    pub dst_col: usize,
    /// `None` means the file has no timestamp column, which is rejected.
    pub time_col: Option<usize>,
    pub comment_prefixes: Vec<String>,
    pub directed: bool,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Whitespace,
            src_col: 0,
            dst_col: 1,
            time_col: Some(2),
            comment_prefixes: vec!["%".to_string(), "#".to_string()],
            directed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedEdges {
    pub registry: NodeRegistry,
    pub edges: TemporalEdgeList,
    pub self_loops_dropped: usize,
}

pub fn parse_edge_list<R: BufRead>(source: R, format: &FormatSpec) -> Result<ParsedEdges> {
    let time_col = format.time_col.ok_or_else(|| IcmenError::Parse {
        line: 0,
        message: "format has no timestamp column".to_string(),
    })?;

    let mut registry = NodeRegistry::new();
    let mut edges = Vec::new();
    let mut self_loops_dropped = 0;

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty()
            || format
                .comment_prefixes
                .iter()
                .any(|p| trimmed.starts_with(p.as_str()))
        {
            continue;
        }
        let fields: Vec<&str> = match &format.delimiter {
            Delimiter::Whitespace => trimmed.split_whitespace().collect(),
            Delimiter::Char(c) => trimmed.split(*c).map(str::trim).collect(),
        };
        let field = |col: usize, name: &str| -> Result<&str> {
            fields.get(col).copied().ok_or_else(|| IcmenError::Parse {
                line: lineno,
                message: format!("missing {name} column {col}"),
            })
        };
        let parse_node = |col: usize, name: &str| -> Result<u64> {
            let raw = field(col, name)?;
            raw.parse::<u64>().map_err(|_| IcmenError::Parse {
                line: lineno,
                message: format!("{name} field {raw:?} is not a non-negative integer"),
            })
        };
        let src = parse_node(format.src_col, "source")?;
        let dst = parse_node(format.dst_col, "destination")?;
        let raw_time = field(time_col, "timestamp")?;
        let timestamp = raw_time
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| IcmenError::Parse {
                line: lineno,
                message: format!("timestamp field {raw_time:?} is not a finite number"),
            })?;

        if src == dst {
            log::warn!("line {lineno}: dropping self-loop on node {src}");
            self_loops_dropped += 1;
            continue;
        }
        let src = registry.get_or_insert(src);
        let dst = registry.get_or_insert(dst);
        edges.push(TemporalEdge::new(src, dst, timestamp));
    }

    Ok(ParsedEdges {
        registry,
        edges: TemporalEdgeList::new(edges, format.directed),
        self_loops_dropped,
    })
}

#[derive(Debug, Clone)]
pub struct ChronologicalSplit {
    pub train: TemporalEdgeList,
    pub test: TemporalEdgeList,
}

/// `floor(fraction * len)` with a small guard against products like
/// `0.29 * 100 = 28.999…`.
pub(crate) fn fraction_count(fraction: f64, len: usize) -> usize {
    ((fraction * len as f64) + 1e-9).floor() as usize
}

pub fn chronological_split(edges: &TemporalEdgeList, fraction: f64) -> Result<ChronologicalSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(IcmenError::InvalidArgument(format!(
            "split fraction {fraction} is not in (0, 1)"
        )));
    }
    if edges.len() < 2 {
        return Err(IcmenError::InsufficientData(format!(
            "need at least 2 events to split, got {}",
            edges.len()
        )));
    }
    let sorted = edges.sorted_by_time();
    let cut = fraction_count(fraction, sorted.len());
    if cut == 0 || cut == sorted.len() {
        return Err(IcmenError::InsufficientData(format!(
            "fraction {fraction} of {} events leaves one side empty",
            sorted.len()
        )));
    }
    let directed = sorted.is_directed();
    let mut train = sorted.into_edges();
    let test = train.split_off(cut);
    Ok(ChronologicalSplit {
        train: TemporalEdgeList::new(train, directed),
        test: TemporalEdgeList::new(test, directed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotMode {
    #[default]
    EqualEvents,
    EqualDuration,
}

/// One incident event seen from a node, in snapshot-local indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incident {
    pub neighbor: u32,
    pub timestamp: f64,
    /// Index of the event in [`Snapshot::edges`].
    pub edge: u32,
}

/// One graph increment. Nodes carry snapshot-local indices `0..nodes().len()`
/// used by the walk generators.
#[derive(Debug, Clone)]
pub struct Snapshot {
    period: usize,
    directed: bool,
    edges: Vec<TemporalEdge>,
    nodes: Vec<NodeId>,
    local: HashMap<NodeId, u32>,
    incidents: Vec<Vec<Incident>>,
    neighbors: Vec<Vec<u32>>,
}

impl Snapshot {
    pub fn from_edges(period: usize, edges: Vec<TemporalEdge>, directed: bool) -> Self {
        let mut nodes: Vec<NodeId> = edges.iter().flat_map(|e| [e.src, e.dst]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let local: HashMap<NodeId, u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, i as u32))
            .collect();

        let mut incidents: Vec<Vec<Incident>> = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            let s = local[&e.src];
            let d = local[&e.dst];
            incidents[s as usize].push(Incident {
                neighbor: d,
                timestamp: e.timestamp,
                edge: i as u32,
            });
            if !directed {
                incidents[d as usize].push(Incident {
                    neighbor: s,
                    timestamp: e.timestamp,
                    edge: i as u32,
                });
            }
        }
        for list in &mut incidents {
            list.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.edge.cmp(&b.edge)));
        }
        let neighbors = incidents
            .iter()
            .map(|list| {
                let mut n: Vec<u32> = list.iter().map(|i| i.neighbor).collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect();

        Self {
            period,
            directed,
            edges,
            nodes,
            local,
            incidents,
            neighbors,
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    /// Vertex set, ascending by id.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.local.contains_key(&node)
    }

    pub fn local_index(&self, node: NodeId) -> Option<u32> {
        self.local.get(&node).copied()
    }

    pub fn node_at(&self, local: u32) -> NodeId {
        self.nodes[local as usize]
    }

    /// Traversable events at a node (outgoing only when directed), sorted by
    /// timestamp ascending.
    pub fn incidents(&self, local: u32) -> &[Incident] {
        &self.incidents[local as usize]
    }

    /// Distinct traversable neighbors at a node, ascending local index.
    pub fn neighbors(&self, local: u32) -> &[u32] {
        &self.neighbors[local as usize]
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        let first = self.edges.first()?;
        Some(self.edges.iter().fold((first.timestamp, first.timestamp), |(lo, hi), e| {
            (lo.min(e.timestamp), hi.max(e.timestamp))
        }))
    }
}

/// Splits time-sorted events into `n` consecutive snapshots (periods `1..=n`).
pub fn make_snapshots(edges: &TemporalEdgeList, n: usize, mode: SnapshotMode) -> Result<Vec<Snapshot>> {
    if n < 2 {
        return Err(IcmenError::InvalidArgument(format!(
            "need at least 2 snapshots, got {n}"
        )));
    }
    if n > edges.len() {
        return Err(IcmenError::InsufficientData(format!(
            "cannot split {} events into {n} snapshots",
            edges.len()
        )));
    }
    if !edges.is_time_sorted() {
        return Err(IcmenError::InvalidArgument(
            "events must be sorted by timestamp before snapshotting".to_string(),
        ));
    }
    let all = edges.edges();
    let directed = edges.is_directed();

    let bounds: Vec<(usize, usize)> = match mode {
        SnapshotMode::EqualEvents => {
            let base = all.len() / n;
            let rem = all.len() % n;
            let mut start = 0;
            (0..n)
                .map(|i| {
                    let len = base + usize::from(i < rem);
                    let b = (start, start + len);
                    start += len;
                    b
                })
                .collect()
        }
        SnapshotMode::EqualDuration => {
            let lo = all[0].timestamp;
            let hi = all[all.len() - 1].timestamp;
            let span = hi - lo;
            let mut bounds = Vec::with_capacity(n);
            let mut start = 0;
            for i in 0..n {
                let end = if i + 1 == n {
                    all.len()
                } else {
                    let cutoff = lo + span * (i + 1) as f64 / n as f64;
                    start + all[start..].partition_point(|e| e.timestamp < cutoff)
                };
                if end == start {
                    return Err(IcmenError::InsufficientData(format!(
                        "equal-duration snapshot {} is empty",
                        i + 1
                    )));
                }
                bounds.push((start, end));
                start = end;
            }
            bounds
        }
    };

    Ok(bounds
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| Snapshot::from_edges(i + 1, all[s..e].to_vec(), directed))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ParsedEdges {
        parse_edge_list(text.as_bytes(), &FormatSpec::default()).unwrap()
    }

    fn edges_of(ts: &[f64]) -> TemporalEdgeList {
        TemporalEdgeList::new(
            ts.iter()
                .enumerate()
                .map(|(i, &t)| TemporalEdge::new(NodeId(i as u32), NodeId(i as u32 + 1), t))
                .collect(),
            false,
        )
    }

    #[test]
    fn parses_simple_list() {
        let p = parse("1 2 100\n2 3 200\n");
        assert_eq!(p.edges.len(), 2);
        assert_eq!(p.registry.len(), 3);
        assert_eq!(p.registry.label(NodeId(2)), Some(3));
    }

    #[test]
    fn skips_comments_and_ignores_weight_column() {
        let p = parse("% header\n# comment\n1 2 100 7\n\n");
        assert_eq!(p.edges.len(), 1);
        assert_eq!(p.edges.edges()[0].timestamp, 100.0);
    }

    #[test]
    fn shuffled_timestamps_keep_file_order() {
        let text = "5 6 30\n6 7 10\n7 5 20\n";
        let p = parse(text);
        // reference parse: split lines by hand
        let reference: Vec<(u64, u64, f64)> = text
            .lines()
            .map(|l| {
                let v: Vec<&str> = l.split(' ').collect();
                (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].parse().unwrap())
            })
            .collect();
        let got: Vec<(u64, u64, f64)> = p
            .edges
            .edges()
            .iter()
            .map(|e| {
                (
                    p.registry.label(e.src).unwrap(),
                    p.registry.label(e.dst).unwrap(),
                    e.timestamp,
                )
            })
            .collect();
        assert_eq!(got, reference);
    }

    #[test]
    fn missing_timestamp_is_error() {
        let err = parse_edge_list("1 2\n".as_bytes(), &FormatSpec::default()).unwrap_err();
        assert!(matches!(err, IcmenError::Parse { line: 1, .. }), "{err}");
        let fmt = FormatSpec {
            time_col: None,
            ..FormatSpec::default()
        };
        assert!(parse_edge_list("1 2 3\n".as_bytes(), &fmt).is_err());
    }

    #[test]
    fn non_numeric_reports_line() {
        let err = parse_edge_list("1 2 3\n1 x 4\n".as_bytes(), &FormatSpec::default()).unwrap_err();
        assert!(matches!(err, IcmenError::Parse { line: 2, .. }), "{err}");
        let err = parse_edge_list("1 2 abc\n".as_bytes(), &FormatSpec::default()).unwrap_err();
        assert!(matches!(err, IcmenError::Parse { line: 1, .. }));
    }

    #[test]
    fn comma_delimited_and_self_loops() {
        let fmt = FormatSpec {
            delimiter: Delimiter::Char(','),
            ..FormatSpec::default()
        };
        let p = parse_edge_list("1, 2, 5\n3,3,6\n".as_bytes(), &fmt).unwrap();
        assert_eq!(p.edges.len(), 1);
        assert_eq!(p.self_loops_dropped, 1);
    }

    #[test]
    fn registry_is_stable_across_parses() {
        let text = "9 4 1\n4 7 2\n7 9 3\n";
        assert_eq!(parse(text).registry, parse(text).registry);
    }

    #[test]
    fn split_counts() {
        let s = chronological_split(&edges_of(&[1., 2., 3., 4., 5., 6., 7., 8.]), 0.75).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (6, 2));
        assert!(chronological_split(&edges_of(&[1., 2.]), 1.0).is_err());
        assert!(chronological_split(&edges_of(&[1., 2.]), 0.0).is_err());
        assert!(chronological_split(&edges_of(&[1.]), 0.5).is_err());
        assert_eq!(fraction_count(0.75, 33720), 25290);
        assert_eq!(fraction_count(0.29, 100), 29);
    }

    #[test]
    fn split_with_equal_timestamps_preserves_file_order() {
        let list = edges_of(&[5.0; 8]);
        let s = chronological_split(&list, 0.75).unwrap();
        assert_eq!(s.train.edges(), &list.edges()[..6]);
        assert_eq!(s.test.edges(), &list.edges()[6..]);
    }

    #[test]
    fn split_sorts_before_cutting() {
        let s = chronological_split(&edges_of(&[4., 1., 3., 2.]), 0.5).unwrap();
        let max_train = s.train.edges().iter().map(|e| e.timestamp).fold(f64::MIN, f64::max);
        let min_test = s.test.edges().iter().map(|e| e.timestamp).fold(f64::MAX, f64::min);
        assert!(max_train <= min_test);
    }

    #[test]
    fn snapshot_sizes() {
        let ten = edges_of(&(0..10).map(f64::from).collect::<Vec<_>>());
        let sizes = |n| {
            make_snapshots(&ten, n, SnapshotMode::EqualEvents)
                .unwrap()
                .iter()
                .map(|s| s.edges().len())
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(2), vec![5, 5]);
        assert_eq!(sizes(3), vec![4, 3, 3]);
        assert!(make_snapshots(&ten, 11, SnapshotMode::EqualEvents).is_err());
        assert!(make_snapshots(&ten, 1, SnapshotMode::EqualEvents).is_err());
        assert!(make_snapshots(&edges_of(&[2., 1.]), 2, SnapshotMode::EqualEvents).is_err());
    }

    #[test]
    fn node_in_early_events_only_appears_in_first_snapshot() {
        let special = NodeId(100);
        let mut edges = Vec::new();
        for t in 0..20 {
            let (a, b) = if t < 3 {
                (special, NodeId(t))
            } else {
                (NodeId(t), NodeId(t + 1))
            };
            edges.push(TemporalEdge::new(a, b, t as f64));
        }
        let list = TemporalEdgeList::new(edges.clone(), false);
        let snaps = make_snapshots(&list, 5, SnapshotMode::EqualEvents).unwrap();
        for s in &snaps {
            let brute = s.edges().iter().any(|e| e.touches(special));
            assert_eq!(s.contains(special), brute);
        }
        assert!(snaps[0].contains(special));
        assert!(snaps[1..].iter().all(|s| !s.contains(special)));
    }

    #[test]
    fn equal_duration_mode() {
        let list = edges_of(&[0., 1., 2., 9., 10.]);
        let snaps = make_snapshots(&list, 2, SnapshotMode::EqualDuration).unwrap();
        assert_eq!(snaps[0].edges().len(), 3);
        assert_eq!(snaps[1].edges().len(), 2);
        let gap = edges_of(&[0., 0.1, 10.]);
        assert!(make_snapshots(&gap, 3, SnapshotMode::EqualDuration).is_err());
    }

    #[test]
    fn incidents_sorted_and_undirected_both_ways() {
        let e = vec![
            TemporalEdge::new(NodeId(0), NodeId(1), 5.0),
            TemporalEdge::new(NodeId(1), NodeId(2), 1.0),
        ];
        let s = Snapshot::from_edges(1, e.clone(), false);
        let b = s.local_index(NodeId(1)).unwrap();
        let ts: Vec<f64> = s.incidents(b).iter().map(|i| i.timestamp).collect();
        assert_eq!(ts, vec![1.0, 5.0]);
        let d = Snapshot::from_edges(1, e, true);
        let b = d.local_index(NodeId(1)).unwrap();
        assert_eq!(d.incidents(b).len(), 1);
        assert_eq!(d.neighbors(b), &[d.local_index(NodeId(2)).unwrap()]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn snapshots_partition_and_are_monotone(
                ts in prop::collection::vec(0u32..50, 2..80),
                n in 2usize..10,
            ) {
                prop_assume!(n <= ts.len());
                let list = edges_of(&ts.iter().map(|&t| t as f64).collect::<Vec<_>>()).sorted_by_time();
                let snaps = make_snapshots(&list, n, SnapshotMode::EqualEvents).unwrap();
                let joined: Vec<TemporalEdge> = snaps.iter().flat_map(|s| s.edges().to_vec()).collect();
                prop_assert_eq!(&joined[..], list.edges());
                for w in snaps.windows(2) {
                    let (_, hi) = w[0].time_range().unwrap();
                    let (lo, _) = w[1].time_range().unwrap();
                    prop_assert!(hi <= lo);
                }
                let sizes: Vec<usize> = snaps.iter().map(|s| s.edges().len()).collect();
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                prop_assert!(max - min <= 1);
            }
        }
    }
}
