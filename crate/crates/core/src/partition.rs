//! Node-to-community assignments.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::IdMap;

/// A hard partition of `0..n` into non-empty communities with contiguous
/// ids `0..n_comms`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assign: Vec<u32>,
    n_comms: usize,
}

impl Partition {
    /// Validates an assignment that is already contiguous and gap-free.
    pub fn new(assign: Vec<u32>) -> Result<Self> {
        let n_comms = assign.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut seen = vec![false; n_comms];
        for &c in &assign {
            seen[c as usize] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "community {empty} is empty (ids must be contiguous)"
            )));
        }
        Ok(Self { assign, n_comms })
    }

    /// Builds a partition from arbitrary labels, renumbering communities in
    /// order of first appearance.
    pub fn from_labels<L>(labels: &[L]) -> Self
    where
        L: Copy + Eq + std::hash::Hash,
    {
        let mut ids: HashMap<L, u32> = HashMap::new();
        let assign = labels
            .iter()
            .map(|l| {
                let next = ids.len() as u32;
                *ids.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            assign,
            n_comms: ids.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assign: (0..n as u32).collect(),
            n_comms: n,
        }
    }

    pub fn whole(n: usize) -> Self {
        Self {
            assign: vec![0; n],
            n_comms: usize::from(n > 0),
        }
    }

    #[inline]
    pub fn community(&self, u: usize) -> usize {
        self.assign[u] as usize
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assign
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn n_comms(&self) -> usize {
        self.n_comms
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_comms];
        for &c in &self.assign {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Members of every community, each list in ascending node order.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut members = vec![Vec::new(); self.n_comms];
        for (u, &c) in self.assign.iter().enumerate() {
            members[c as usize].push(u as u32);
        }
        members
    }

    /// Maps every node of `self` through a partition of its communities.
    /// Used to flatten multi-level results back to the original nodes.
    pub fn compose(&self, upper: &Partition) -> Result<Partition> {
        if upper.len() != self.n_comms {
            return Err(Error::PartitionMismatch {
                partition: upper.len(),
                graph: self.n_comms,
            });
        }
        let assign = self
            .assign
            .iter()
            .map(|&c| upper.assign[c as usize])
            .collect();
        Ok(Partition {
            assign,
            n_comms: upper.n_comms,
        })
    }

    pub(crate) fn check_covers(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::PartitionMismatch {
                partition: self.len(),
                graph: n,
            });
        }
        Ok(())
    }
}

/// Writes `original_id <TAB> community_id`, one line per node.
pub fn write_partition<W: Write>(
    mut out: W,
    p: &Partition,
    ids: &IdMap,
    header: Option<&str>,
) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(out, "{h}")?;
    }
    for (u, &c) in p.assign.iter().enumerate() {
        writeln!(out, "{}\t{}", ids.original(u), c)?;
    }
    Ok(())
}

pub fn save_partition(path: &Path, p: &Partition, ids: &IdMap, header: Option<&str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_partition(&mut w, p, ids, header)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a partition file against the graph's id map. Every node must be
/// listed exactly once; community labels are renumbered contiguously.
pub fn load_partition(path: &Path, ids: &IdMap) -> Result<Partition> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels: Vec<Option<u64>> = vec![None; ids.len()];
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(comm), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(path, i + 1, "expected `original_id<TAB>community`"));
        };
        let id: u64 = id
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad node id `{id}`")))?;
        let comm: u64 = comm
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad community `{comm}`")))?;
        let dense = ids
            .dense(id)
            .ok_or_else(|| Error::parse(path, i + 1, format!("node {id} is not in the graph")))?;
        if labels[dense].replace(comm).is_some() {
            return Err(Error::parse(path, i + 1, format!("node {id} listed twice")));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(u, l)| {
            l.ok_or_else(|| {
                Error::InvalidPartition(format!("node {} has no community", ids.original(u)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::from_labels(&labels))
}
