//! Immutable directed graph in compressed sparse form.
//!
//! Arc `u -> v` means "u follows v": out-neighbours are followees and
//! in-neighbours are followers. Both adjacency directions are stored as CSR
//! with neighbour lists sorted by id, so set operations between the two
//! (e.g. the overlap index) are a linear merge.
//!
//! Ingested graphs never contain self-loops or parallel arcs. Weighted graphs
//! with self-loops only arise as Louvain's aggregated level graphs, built with
//! [`DirectedGraph::from_weighted_arcs`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Out, Direction::In];

    pub fn suffix(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

/// How a line `a b` of an edge list maps to an arc.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ArcConvention {
    /// `a b` is the arc a -> b (a follows b).
    #[default]
    SrcFollowsDst,
    /// `a b` is the arc b -> a (b follows a).
    DstFollowsSrc,
}

impl ArcConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcConvention::SrcFollowsDst => "src-follows-dst",
            ArcConvention::DstFollowsSrc => "dst-follows-src",
        }
    }
}

impl FromStr for ArcConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "src-follows-dst" => Ok(ArcConvention::SrcFollowsDst),
            "dst-follows-src" => Ok(ArcConvention::DstFollowsSrc),
            other => Err(Error::Config(format!(
                "unknown direction `{other}` (expected src-follows-dst or dst-follows-src)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degrees {
    pub k_in: usize,
    pub k_out: usize,
    pub k_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    out_weights: Option<Vec<f64>>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    in_weights: Option<Vec<f64>>,
}

/// Counters reported by ingest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl DirectedGraph {
    /// Builds a simple graph on `n` nodes. Self-loops and duplicate arcs are
    /// dropped and counted.
    pub fn from_arcs(n: usize, mut arcs: Vec<(u32, u32)>) -> Result<(Self, IngestStats)> {
        check_ids(n, arcs.iter().map(|&(u, v)| (u, v)))?;
        let before = arcs.len();
        arcs.retain(|&(u, v)| u != v);
        let self_loops_dropped = before - arcs.len();
        arcs.sort_unstable();
        let before = arcs.len();
        arcs.dedup();
        let duplicates_dropped = before - arcs.len();

        let (out_offsets, out_targets, _) = build_csr(n, arcs.iter().map(|&(u, v)| (u, v, ())));
        let (in_offsets, in_sources, _) = build_csr(n, arcs.iter().map(|&(u, v)| (v, u, ())));
        let g = Self {
            n,
            out_offsets,
            out_targets,
            out_weights: None,
            in_offsets,
            in_sources,
            in_weights: None,
        };
        Ok((
            g,
            IngestStats {
                self_loops_dropped,
                duplicates_dropped,
            },
        ))
    }

    /// Builds a weighted graph. Parallel arcs are merged by summing their
    /// weights and self-loops are kept.
    pub fn from_weighted_arcs(n: usize, mut arcs: Vec<(u32, u32, f64)>) -> Result<Self> {
        check_ids(n, arcs.iter().map(|&(u, v, _)| (u, v)))?;
        if let Some(&(_, _, w)) = arcs.iter().find(|a| !(a.2 >= 0.0) || !a.2.is_finite()) {
            return Err(Error::Domain(format!("arc weight {w} is not a non-negative real")));
        }
        arcs.sort_unstable_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(arcs.len());
        for (u, v, w) in arcs {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }
        let (out_offsets, out_targets, out_weights) =
            build_csr(n, merged.iter().map(|&(u, v, w)| (u, v, w)));
        let (in_offsets, in_sources, in_weights) =
            build_csr(n, merged.iter().map(|&(u, v, w)| (v, u, w)));
        Ok(Self {
            n,
            out_offsets,
            out_targets,
            out_weights: Some(out_weights),
            in_offsets,
            in_sources,
            in_weights: Some(in_weights),
        })
    }

    pub fn empty() -> Self {
        Self::from_arcs(0, Vec::new()).expect("empty graph").0
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of arcs (distinct ordered pairs, self-loops included).
    #[inline]
    pub fn m(&self) -> usize {
        self.out_targets.len()
    }

    pub fn is_weighted(&self) -> bool {
        self.out_weights.is_some()
    }

    /// Sum of arc weights; equals `m` for simple graphs.
    pub fn total_weight(&self) -> f64 {
        match &self.out_weights {
            Some(w) => w.iter().sum(),
            None => self.m() as f64,
        }
    }

    #[inline]
    pub fn out_neighbors(&self, u: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    #[inline]
    pub fn in_neighbors(&self, u: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    #[inline]
    pub fn neighbors(&self, u: usize, dir: Direction) -> &[u32] {
        match dir {
            Direction::Out => self.out_neighbors(u),
            Direction::In => self.in_neighbors(u),
        }
    }

    /// `(neighbour, weight)` pairs in the given direction.
    pub fn weighted_neighbors(&self, u: usize, dir: Direction) -> impl Iterator<Item = (u32, f64)> + '_ {
        let (range, targets, weights) = match dir {
            Direction::Out => (
                self.out_offsets[u]..self.out_offsets[u + 1],
                &self.out_targets,
                &self.out_weights,
            ),
            Direction::In => (
                self.in_offsets[u]..self.in_offsets[u + 1],
                &self.in_sources,
                &self.in_weights,
            ),
        };
        range.map(move |i| (targets[i], weights.as_ref().map_or(1.0, |w| w[i])))
    }

    /// Weighted degree in one direction (equals the arc count when unweighted).
    pub fn strength(&self, u: usize, dir: Direction) -> f64 {
        match (dir, &self.out_weights, &self.in_weights) {
            (Direction::Out, Some(w), _) => w[self.out_offsets[u]..self.out_offsets[u + 1]].iter().sum(),
            (Direction::In, _, Some(w)) => w[self.in_offsets[u]..self.in_offsets[u + 1]].iter().sum(),
            _ => self.neighbors(u, dir).len() as f64,
        }
    }

    #[inline]
    pub fn out_degree(&self, u: usize) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    #[inline]
    pub fn in_degree(&self, u: usize) -> usize {
        self.in_offsets[u + 1] - self.in_offsets[u]
    }

    pub fn degrees(&self, u: usize) -> Result<Degrees> {
        self.check_node(u)?;
        let k_in = self.in_degree(u);
        let k_out = self.out_degree(u);
        Ok(Degrees {
            k_in,
            k_out,
            k_total: k_in + k_out,
        })
    }

    /// All arcs as `(source, target, weight)` in source-major sorted order.
    pub fn arcs(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.weighted_neighbors(u, Direction::Out)
                .map(move |(v, w)| (u as u32, v, w))
        })
    }

    /// The graph with every arc reversed.
    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            out_offsets: self.in_offsets.clone(),
            out_targets: self.in_sources.clone(),
            out_weights: self.in_weights.clone(),
            in_offsets: self.out_offsets.clone(),
            in_sources: self.out_targets.clone(),
            in_weights: self.out_weights.clone(),
        }
    }

    pub(crate) fn check_node(&self, u: usize) -> Result<()> {
        if u >= self.n {
            return Err(Error::NodeOutOfRange { node: u, n: self.n });
        }
        Ok(())
    }

    pub(crate) fn check_partition(&self, p: &Partition) -> Result<()> {
        p.check_covers(self.n)
    }
}

fn check_ids(n: usize, mut arcs: impl Iterator<Item = (u32, u32)>) -> Result<()> {
    match arcs.find(|&(u, v)| u as usize >= n || v as usize >= n) {
        Some((u, v)) => Err(Error::NodeOutOfRange {
            node: u.max(v) as usize,
            n,
        }),
        None => Ok(()),
    }
}

/// Counting-sort CSR build. When `entries` arrive sorted by (key, value) the
/// per-key value lists come out sorted; when they arrive sorted by value
/// (the transposed direction) stability keeps them sorted as well.
fn build_csr<T: Copy + Default>(
    n: usize,
    entries: impl Iterator<Item = (u32, u32, T)> + Clone,
) -> (Vec<usize>, Vec<u32>, Vec<T>) {
    let mut offsets = vec![0usize; n + 1];
    let mut len = 0;
    for (k, _, _) in entries.clone() {
        offsets[k as usize + 1] += 1;
        len += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut values = vec![0u32; len];
    let mut payload = vec![T::default(); len];
    for (k, v, t) in entries {
        let slot = &mut cursor[k as usize];
        values[*slot] = v;
        payload[*slot] = t;
        *slot += 1;
    }
    (offsets, values, payload)
}

/// Dense-id to original-id mapping, sorted ascending so that dense ids
/// preserve the order of the original ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    original: Vec<u64>,
}

impl IdMap {
    pub fn identity(n: usize) -> Self {
        Self {
            original: (0..n as u64).collect(),
        }
    }

    /// `original` must be strictly increasing.
    pub fn from_sorted(original: Vec<u64>) -> Self {
        debug_assert!(original.windows(2).all(|w| w[0] < w[1]));
        Self { original }
    }

    #[inline]
    pub fn original(&self, dense: usize) -> u64 {
        self.original[dense]
    }

    pub fn dense(&self, original: u64) -> Option<usize> {
        self.original.binary_search(&original).ok()
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }
}

/// A graph read from an edge list, with the id map needed to report
/// results in terms of the file's ids.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: DirectedGraph,
    pub ids: IdMap,
    pub stats: IngestStats,
}

/// Parses an edge list: one arc per line, two non-negative base-10 integers
/// separated by spaces or tabs. Blank lines and lines starting with `#` or
/// `%` are skipped.
pub fn read_edge_list<R: BufRead>(
    reader: R,
    source: &Path,
    convention: ArcConvention,
) -> Result<LoadedGraph> {
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(source, i + 1, "expected exactly two node ids"));
        };
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::parse(source, i + 1, format!("`{s}` is not a non-negative integer")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        pairs.push(match convention {
            ArcConvention::SrcFollowsDst => (a, b),
            ArcConvention::DstFollowsSrc => (b, a),
        });
    }

    let mut original: Vec<u64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    original.sort_unstable();
    original.dedup();
    if original.len() > u32::MAX as usize {
        return Err(Error::Domain(format!("{} distinct node ids exceed u32 range", original.len())));
    }
    let ids = IdMap::from_sorted(original);
    let arcs = pairs
        .into_iter()
        .map(|(a, b)| {
            (
                ids.dense(a).expect("id present") as u32,
                ids.dense(b).expect("id present") as u32,
            )
        })
        .collect();
    let (graph, stats) = DirectedGraph::from_arcs(ids.len(), arcs)?;
    if stats.self_loops_dropped > 0 || stats.duplicates_dropped > 0 {
        warn!(
            "{}: dropped {} self-loops and {} duplicate arcs",
            source.display(),
            stats.self_loops_dropped,
            stats.duplicates_dropped
        );
    }
    Ok(LoadedGraph { graph, ids, stats })
}

pub fn load_edge_list(path: &Path, convention: ArcConvention) -> Result<LoadedGraph> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_edge_list(BufReader::with_capacity(1 << 20, file), path, convention)
}

/// Writes the canonical edge list (src-follows-dst, original ids, sorted).
/// Isolated nodes are written as self-loops so that reloading the file
/// reproduces the same node set.
pub fn write_edge_list<W: Write>(mut out: W, g: &DirectedGraph, ids: &IdMap) -> std::io::Result<()> {
    for u in 0..g.n() {
        let orig = ids.original(u);
        if g.out_degree(u) == 0 && g.in_degree(u) == 0 {
            writeln!(out, "{orig}\t{orig}")?;
        }
        for &v in g.out_neighbors(u) {
            writeln!(out, "{orig}\t{}", ids.original(v as usize))?;
        }
    }
    Ok(())
}

/// Counts `u`'s neighbours in direction `dir` per community. Communities
/// with no such neighbour are absent.
pub fn community_link_counts(
    g: &DirectedGraph,
    u: usize,
    p: &Partition,
    dir: Direction,
) -> Result<BTreeMap<usize, usize>> {
    g.check_node(u)?;
    g.check_partition(p)?;
    let mut counts = BTreeMap::new();
    for &v in g.neighbors(u, dir) {
        *counts.entry(p.community(v as usize)).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> LoadedGraph {
        read_edge_list(text.as_bytes(), Path::new("test"), ArcConvention::SrcFollowsDst).unwrap()
    }

    pub(crate) fn g1() -> (DirectedGraph, Partition) {
        let arcs = vec![(0, 1), (1, 0), (1, 2), (0, 3), (4, 0), (3, 4), (4, 5), (5, 3)];
        let (g, _) = DirectedGraph::from_arcs(6, arcs).unwrap();
        (g, Partition::from_labels(&[0, 0, 0, 1, 1, 1]))
    }

    #[test]
    fn ingest_three_lines() {
        let l = parse("0 1\n1 0\n1 2\n");
        assert_eq!(l.graph.n(), 3);
        assert_eq!(l.graph.m(), 3);
        assert_eq!(l.graph.out_neighbors(1), &[0, 2]);
    }

    #[test]
    fn self_loop_dropped_node_kept() {
        let l = parse("0 0\n");
        assert_eq!((l.graph.n(), l.graph.m()), (1, 0));
        assert_eq!(l.stats.self_loops_dropped, 1);
    }

    #[test]
    fn duplicate_dropped() {
        let l = parse("0 1\n0 1\n");
        assert_eq!(l.graph.m(), 1);
        assert_eq!(l.stats.duplicates_dropped, 1);
    }

    #[test]
    fn empty_input_is_empty_graph() {
        let l = parse("# nothing here\n\n% also nothing\n");
        assert_eq!((l.graph.n(), l.graph.m()), (0, 0));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read_edge_list("0 1\n2 x\n".as_bytes(), Path::new("f"), ArcConvention::default())
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        assert!(read_edge_list("1 2 3\n".as_bytes(), Path::new("f"), ArcConvention::default()).is_err());
        assert!(read_edge_list("-1 2\n".as_bytes(), Path::new("f"), ArcConvention::default()).is_err());
    }

    #[test]
    fn sparse_ids_are_remapped() {
        let l = parse("100\t7\n7   42\n");
        assert_eq!(l.graph.n(), 3);
        assert_eq!(l.ids.original(0), 7);
        assert_eq!(l.ids.dense(100), Some(2));
        assert_eq!(l.graph.out_neighbors(2), &[0]);
    }

    #[test]
    fn reversed_convention() {
        let l = read_edge_list("0 1\n".as_bytes(), Path::new("f"), ArcConvention::DstFollowsSrc).unwrap();
        assert_eq!(l.graph.out_neighbors(1), &[0]);
        assert!(l.graph.out_neighbors(0).is_empty());
    }

    #[test]
    fn degrees_examples() {
        let l = parse("0 1\n1 0\n1 2\n");
        let d = l.graph.degrees(1).unwrap();
        assert_eq!((d.k_in, d.k_out, d.k_total), (1, 2, 3));
        let (g, _) = DirectedGraph::from_arcs(2, vec![(0, 1)]).unwrap();
        let d = g.degrees(0).unwrap();
        assert_eq!((d.k_in, d.k_out, d.k_total), (0, 1, 1));
        let (g, _) = DirectedGraph::from_arcs(3, vec![(0, 1)]).unwrap();
        assert_eq!(g.degrees(2).unwrap().k_total, 0);
        assert!(matches!(g.degrees(3), Err(Error::NodeOutOfRange { .. })));
    }

    #[test]
    fn link_counts_on_g1() {
        let (g, p) = g1();
        let counts = community_link_counts(&g, 0, &p, Direction::Out).unwrap();
        assert_eq!(counts, BTreeMap::from([(0, 1), (1, 1)]));
        let counts = community_link_counts(&g, 5, &p, Direction::In).unwrap();
        assert_eq!(counts, BTreeMap::from([(1, 1)]));
        let (g, _) = DirectedGraph::from_arcs(2, vec![]).unwrap();
        let p = Partition::singletons(2);
        assert!(community_link_counts(&g, 1, &p, Direction::Out).unwrap().is_empty());
    }

    #[test]
    fn weighted_merge_and_self_loops() {
        let g = DirectedGraph::from_weighted_arcs(2, vec![(0, 0, 1.0), (0, 1, 2.0), (0, 1, 0.5)]).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.total_weight(), 3.5);
        assert_eq!(g.strength(0, Direction::Out), 3.5);
        assert_eq!(g.strength(0, Direction::In), 1.0);
        assert_eq!(g.strength(1, Direction::In), 2.5);
        assert!(DirectedGraph::from_weighted_arcs(1, vec![(0, 0, -1.0)]).is_err());
    }

    #[test]
    fn canonical_round_trip_keeps_isolated() {
        let l = parse("5 5\n1 3\n3 1\n");
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &l.graph, &l.ids).unwrap();
        let again = read_edge_list(buf.as_slice(), Path::new("rt"), ArcConvention::default()).unwrap();
        assert_eq!(again.graph, l.graph);
        assert_eq!(again.ids, l.ids);
    }
}
