//! Node embedding matrices and their on-disk formats.
//!
//! Text format: a header line `<row_count> <d>` followed by one line per node,
//! `<node_label> <v1> ... <vd>`, values printed with 6 significant digits.
//! Binary format: little-endian, exact; carries context vectors too.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use rand::Rng;

use crate::error::{IcmenError, Result};
use crate::graph::{NodeId, NodeRegistry};
use crate::rng::seeded;

const BINARY_MAGIC: &[u8; 8] = b"ICMEMB01";

/// Read access to per-node vectors, shared by snapshot embeddings and
/// combined embeddings.
pub trait NodeVectors {
    fn dim(&self) -> usize;
    fn node_ids(&self) -> &[NodeId];
    fn vector(&self, node: NodeId) -> Option<&[f64]>;

    fn has_node(&self, node: NodeId) -> bool {
        self.vector(node).is_some()
    }
}

impl<T: NodeVectors + ?Sized> NodeVectors for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn node_ids(&self) -> &[NodeId] {
        (**self).node_ids()
    }

    fn vector(&self, node: NodeId) -> Option<&[f64]> {
        (**self).vector(node)
    }
}

/// Input vectors plus companion context vectors for one snapshot, rows keyed
/// by global node id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    nodes: Vec<NodeId>,
    rows: HashMap<NodeId, usize>,
    input: Vec<f64>,
    context: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            nodes: Vec::new(),
            rows: HashMap::new(),
            input: Vec::new(),
            context: Vec::new(),
        }
    }

    /// Input rows uniform in `[-0.5/d, 0.5/d]`, context rows zero.
    pub fn random(dim: usize, nodes: &[NodeId], seed: u64) -> Self {
        let mut m = Self::new(dim);
        let mut rng = seeded(seed, 0x1417);
        let half = 0.5 / dim as f64;
        for &n in nodes {
            let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(-half..=half)).collect();
            m.insert(n, &row, None);
        }
        m
    }

    pub fn from_rows<'a>(dim: usize, rows: impl IntoIterator<Item = (NodeId, &'a [f64])>) -> Result<Self> {
        let mut m = Self::new(dim);
        for (node, row) in rows {
            if row.len() != dim {
                return Err(IcmenError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            m.insert(node, row, None);
        }
        Ok(m)
    }

    /// Inserts or overwrites a row. A `None` context leaves an existing context
    /// row as is and zero-fills a new one.
    pub fn insert(&mut self, node: NodeId, input: &[f64], context: Option<&[f64]>) -> usize {
        assert_eq!(input.len(), self.dim, "row dimension");
        let d = self.dim;
        let idx = match self.rows.get(&node) {
            Some(&i) => i,
            None => {
                let i = self.nodes.len();
                self.nodes.push(node);
                self.rows.insert(node, i);
                self.input.resize(self.input.len() + d, 0.0);
                self.context.resize(self.context.len() + d, 0.0);
                i
            }
        };
        self.input[idx * d..(idx + 1) * d].copy_from_slice(input);
        if let Some(c) = context {
            assert_eq!(c.len(), d, "context dimension");
            self.context[idx * d..(idx + 1) * d].copy_from_slice(c);
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn row_index(&self, node: NodeId) -> Option<usize> {
        self.rows.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.rows.contains_key(&node)
    }

    pub fn input(&self, node: NodeId) -> Option<&[f64]> {
        let i = self.row_index(node)?;
        Some(self.input_at(i))
    }

    pub fn context(&self, node: NodeId) -> Option<&[f64]> {
        let i = self.row_index(node)?;
        Some(&self.context[i * self.dim..(i + 1) * self.dim])
    }

    pub fn input_at(&self, row: usize) -> &[f64] {
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn input_at_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub(crate) fn buffers_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.input, &mut self.context)
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.context).all(|v| v.is_finite())
    }

    pub fn max_row_norm(&self) -> f64 {
        self.input
            .chunks(self.dim.max(1))
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn write_text<W: Write>(&self, registry: &NodeRegistry, out: W) -> Result<()> {
        let rows = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let label = registry
                    .label(n)
                    .ok_or(IcmenError::MissingNode(n))?
                    .to_string();
                Ok((label, self.input_at(i)))
            })
            .collect::<Result<Vec<_>>>()?;
        write_text_rows(out, self.dim, rows.iter().map(|(l, r)| (l.as_str(), *r)))
    }

    /// Reads the text format. Unknown labels are added to `registry`; context
    /// vectors are zero.
    pub fn read_text<R: BufRead>(source: R, registry: &mut NodeRegistry) -> Result<Self> {
        let (dim, rows) = read_text_rows(source)?;
        let mut m = Self::new(dim);
        for (label, row) in rows {
            let label: u64 = label
                .parse()
                .map_err(|_| IcmenError::Format(format!("node label {label:?} is not an integer")))?;
            m.insert(registry.get_or_insert(label), &row, None);
        }
        Ok(m)
    }

    pub fn write_binary<W: Write>(&self, registry: &NodeRegistry, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        for (i, &n) in self.nodes.iter().enumerate() {
            let label = registry.label(n).ok_or(IcmenError::MissingNode(n))?;
            out.write_all(&label.to_le_bytes())?;
            for v in self.input_at(i) {
                out.write_all(&v.to_le_bytes())?;
            }
            for v in &self.context[i * self.dim..(i + 1) * self.dim] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut source: R, registry: &mut NodeRegistry) -> Result<Self> {
        let mut magic = [0u8; 8];
        source.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(IcmenError::Format("not an embedding binary file".into()));
        }
        let rows = read_u64(&mut source)? as usize;
        let dim = read_u64(&mut source)? as usize;
        let mut m = Self::new(dim);
        let mut input = vec![0.0; dim];
        let mut context = vec![0.0; dim];
        for _ in 0..rows {
            let label = read_u64(&mut source)?;
            for v in input.iter_mut().chain(context.iter_mut()) {
                *v = f64::from_bits(read_u64(&mut source)?);
            }
            m.insert(registry.get_or_insert(label), &input, Some(&context));
        }
        Ok(m)
    }
}

impl NodeVectors for EmbeddingMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn node_ids(&self) -> &[NodeId] {
        &self.nodes
    }

    fn vector(&self, node: NodeId) -> Option<&[f64]> {
        self.input(node)
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Formats like C's `%g` with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn write_text_rows<'a, W: Write>(
    mut out: W,
    dim: usize,
    rows: impl ExactSizeIterator<Item = (&'a str, &'a [f64])>,
) -> Result<()> {
    writeln!(out, "{} {}", rows.len(), dim)?;
    let mut line = String::new();
    for (label, row) in rows {
        line.clear();
        line.push_str(label);
        for &v in row {
            line.push(' ');
            line.push_str(&format_sig6(v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub(crate) fn read_text_rows<R: BufRead>(source: R) -> Result<(usize, Vec<(String, Vec<f64>)>)> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| IcmenError::Format("empty embedding file".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: Option<&&str>| -> Result<usize> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| IcmenError::Format(format!("bad header {header:?}")))
    };
    let (count, dim) = (parse_usize(parts.first())?, parse_usize(parts.get(1))?);
    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let label = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| IcmenError::Format(format!("row {}: {e}", i + 1)))?;
        if values.len() != dim {
            return Err(IcmenError::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        rows.push((label, values));
    }
    if rows.len() != count {
        return Err(IcmenError::Format(format!(
            "header announces {count} rows, found {}",
            rows.len()
        )));
    }
    Ok((dim, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(n: u32) -> NodeRegistry {
        let mut r = NodeRegistry::new();
        for i in 0..n {
            r.get_or_insert(1000 + i as u64);
        }
        r
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(-0.5), "-0.5");
        assert_eq!(format_sig6(1.23456789), "1.23457");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(0.0000123456789), "1.23457e-5");
        assert_eq!(format_sig6(9.9999996), "10");
    }

    #[test]
    fn random_init_ranges() {
        let nodes: Vec<NodeId> = (0..20).map(NodeId).collect();
        let m = EmbeddingMatrix::random(8, &nodes, 1);
        assert_eq!(m.len(), 20);
        for &n in &nodes {
            assert!(m.input(n).unwrap().iter().all(|v| v.abs() <= 0.5 / 8.0));
            assert!(m.context(n).unwrap().iter().all(|&v| v == 0.0));
        }
        assert_eq!(m, EmbeddingMatrix::random(8, &nodes, 1));
    }

    #[test]
    fn text_round_trip_is_close() {
        let reg = registry(5);
        let nodes: Vec<NodeId> = (0..5).map(NodeId).collect();
        let m = EmbeddingMatrix::random(4, &nodes, 9);
        let mut buf = Vec::new();
        m.write_text(&reg, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("5 4\n1000 "));
        let mut reg2 = reg.clone();
        let back = EmbeddingMatrix::read_text(buf.as_slice(), &mut reg2).unwrap();
        assert_eq!(reg2, reg);
        for &n in &nodes {
            for (a, b) in m.input(n).unwrap().iter().zip(back.input(n).unwrap()) {
                assert!((a - b).abs() <= 5e-6 * a.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let reg = registry(3);
        let mut m = EmbeddingMatrix::new(2);
        m.insert(NodeId(2), &[0.1, -1e-300], Some(&[3.0, f64::MIN_POSITIVE]));
        m.insert(NodeId(0), &[1.0 / 3.0, 2.0], None);
        let mut buf = Vec::new();
        m.write_binary(&reg, &mut buf).unwrap();
        let mut reg2 = reg.clone();
        let back = EmbeddingMatrix::read_binary(buf.as_slice(), &mut reg2).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_text_rejected() {
        let mut reg = NodeRegistry::new();
        assert!(EmbeddingMatrix::read_text("2 2\n1 0.5 0.5\n".as_bytes(), &mut reg).is_err());
        assert!(EmbeddingMatrix::read_text("1 2\n1 0.5\n".as_bytes(), &mut reg).is_err());
        assert!(EmbeddingMatrix::read_text("1 1\nx 0.5\n".as_bytes(), &mut reg).is_err());
        assert!(EmbeddingMatrix::read_binary(&b"garbage!"[..], &mut reg).is_err());
    }

    #[test]
    fn insert_overwrites_in_place() {
        let mut m = EmbeddingMatrix::new(2);
        m.insert(NodeId(5), &[1.0, 2.0], Some(&[9.0, 9.0]));
        m.insert(NodeId(5), &[3.0, 4.0], None);
        assert_eq!(m.len(), 1);
        assert_eq!(m.input(NodeId(5)).unwrap(), &[3.0, 4.0]);
        assert_eq!(m.context(NodeId(5)).unwrap(), &[9.0, 9.0]);
    }
}
