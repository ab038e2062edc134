//! Social-capitalist detection and positioning.
//!
//! A capitalist is a node whose followers and followees overlap heavily.
//! Detected nodes are split by in-degree band and by ratio (followees per
//! follower) into follow-back (FMIFY), follow-first (IFYFM) and passive
//! behaviours, then cross-tabulated against role groups.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// In-degree where the low band starts; also the classification floor.
pub const LOW_BAND_MIN: usize = 500;
/// Largest in-degree of the low band.
pub const LOW_BAND_MAX: usize = 10_000;
/// Below this ratio a high-band capitalist is considered passive.
pub const PASSIVE_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    /// 500 <= k_in <= 10000
    Low,
    /// k_in > 10000
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    Passive,
    /// "Follow me, I follow you": more followers than followees.
    Fmify,
    /// "I follow you, follow me": at least as many followees as followers.
    Ifyfm,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::High => "high",
        }
    }
}

impl Behavior {
    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Passive => "passive",
            Behavior::Fmify => "FMIFY",
            Behavior::Ifyfm => "IFYFM",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Band::Low),
            "high" => Ok(Band::High),
            _ => Err(Error::Domain(format!("unknown band `{s}`"))),
        }
    }
}

impl FromStr for Behavior {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passive" => Ok(Behavior::Passive),
            "FMIFY" => Ok(Behavior::Fmify),
            "IFYFM" => Ok(Behavior::Ifyfm),
            _ => Err(Error::Domain(format!("unknown behavior `{s}`"))),
        }
    }
}

/// The (band, behavior) slices in report order.
pub const SLICES: [(Band, Behavior); 5] = [
    (Band::Low, Behavior::Fmify),
    (Band::Low, Behavior::Ifyfm),
    (Band::High, Behavior::Passive),
    (Band::High, Behavior::Fmify),
    (Band::High, Behavior::Ifyfm),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CapitalistRecord {
    pub node: usize,
    pub k_in: usize,
    pub k_out: usize,
    pub overlap: f64,
    pub ratio: f64,
    pub band: Band,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub overlap_min: f64,
    pub in_degree_min: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            overlap_min: 0.8,
            in_degree_min: LOW_BAND_MIN,
        }
    }
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// `|followers ∩ followees| / min(|followers|, |followees|)`, zero when
/// either set is empty.
pub fn overlap_index(g: &DirectedGraph, u: usize) -> Result<f64> {
    g.check_node(u)?;
    let (fin, fout) = (g.in_neighbors(u), g.out_neighbors(u));
    let smaller = fin.len().min(fout.len());
    if smaller == 0 {
        return Ok(0.0);
    }
    Ok(intersection_size(fin, fout) as f64 / smaller as f64)
}

/// Out-degree over in-degree.
pub fn ratio(g: &DirectedGraph, u: usize) -> Result<f64> {
    g.check_node(u)?;
    let k_in = g.in_degree(u);
    if k_in == 0 {
        return Err(Error::UndefinedRatio { node: u });
    }
    Ok(g.out_degree(u) as f64 / k_in as f64)
}

/// Band and behaviour from in-degree and ratio. Ratio boundaries are
/// half-open upward: exactly 0.7 is FMIFY and exactly 1 is IFYFM.
pub fn classify(k_in: usize, ratio: f64) -> Result<(Band, Behavior)> {
    if k_in < LOW_BAND_MIN {
        return Err(Error::BelowDegreeFloor { k_in });
    }
    if !(ratio >= 0.0) {
        return Err(Error::Domain(format!("ratio {ratio} is not a non-negative real")));
    }
    Ok(if k_in <= LOW_BAND_MAX {
        let behavior = if ratio < 1.0 { Behavior::Fmify } else { Behavior::Ifyfm };
        (Band::Low, behavior)
    } else {
        let behavior = if ratio < PASSIVE_RATIO {
            Behavior::Passive
        } else if ratio < 1.0 {
            Behavior::Fmify
        } else {
            Behavior::Ifyfm
        };
        (Band::High, behavior)
    })
}

pub fn classify_record(k_in: usize, k_out: usize, overlap: f64) -> Result<(Band, Behavior)> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::Domain(format!("overlap {overlap} outside [0, 1]")));
    }
    if k_in == 0 {
        return Err(Error::BelowDegreeFloor { k_in });
    }
    classify(k_in, k_out as f64 / k_in as f64)
}

/// All nodes passing both thresholds, sorted by descending in-degree
/// (ties by node id).
pub fn detect_capitalists(g: &DirectedGraph, cfg: &DetectionConfig) -> Result<Vec<CapitalistRecord>> {
    if !(0.0..=1.0).contains(&cfg.overlap_min) {
        return Err(Error::Config(format!("overlap_min {} outside [0, 1]", cfg.overlap_min)));
    }
    if cfg.in_degree_min < LOW_BAND_MIN {
        return Err(Error::Config(format!(
            "in_degree_min {} is below the band floor {LOW_BAND_MIN}",
            cfg.in_degree_min
        )));
    }
    let floor = cfg.in_degree_min;
    let mut records: Vec<CapitalistRecord> = (0..g.n())
        .into_par_iter()
        .filter(|&u| g.in_degree(u) >= floor)
        .filter_map(|u| {
            let overlap = overlap_index(g, u).expect("node in range");
            if overlap < cfg.overlap_min {
                return None;
            }
            let (k_in, k_out) = (g.in_degree(u), g.out_degree(u));
            let ratio = k_out as f64 / k_in as f64;
            let (band, behavior) = classify(k_in, ratio).expect("degree floor applied");
            Some(CapitalistRecord {
                node: u,
                k_in,
                k_out,
                overlap,
                ratio,
                band,
                behavior,
            })
        })
        .collect();
    records.sort_by(|a, b| b.k_in.cmp(&a.k_in).then(a.node.cmp(&b.node)));
    Ok(records)
}

/// One (band, behavior) slice of the group cross-tabulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTabRow {
    pub band: Band,
    pub behavior: Behavior,
    /// Capitalists of this slice in each group.
    pub counts: Vec<usize>,
    /// Percentage of the slice's capitalists falling in each group.
    pub share_of_capitalists: Vec<f64>,
    /// Percentage of each group's nodes that are capitalists of this slice.
    pub share_of_group: Vec<f64>,
}

impl CrossTabRow {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Cross-tabulates capitalists against `groups` (one group id per node,
/// `k` groups). Empty slices yield all-zero rows.
pub fn crosstab(records: &[CapitalistRecord], groups: &[usize], k: usize) -> Result<Vec<CrossTabRow>> {
    let mut sizes = vec![0usize; k];
    for &g in groups {
        if g >= k {
            return Err(Error::Domain(format!("group {g} out of range for k={k}")));
        }
        sizes[g] += 1;
    }
    let entries = records
        .iter()
        .map(|r| {
            let group = *groups.get(r.node).ok_or(Error::NodeOutOfRange {
                node: r.node,
                n: groups.len(),
            })?;
            Ok((r.band, r.behavior, group))
        })
        .collect::<Result<Vec<_>>>()?;
    crosstab_entries(&entries, &sizes)
}

/// Cross-tabulation from `(band, behavior, group)` triples and group sizes.
pub fn crosstab_entries(entries: &[(Band, Behavior, usize)], sizes: &[usize]) -> Result<Vec<CrossTabRow>> {
    let k = sizes.len();
    let mut rows: Vec<CrossTabRow> = SLICES
        .iter()
        .map(|&(band, behavior)| CrossTabRow {
            band,
            behavior,
            counts: vec![0; k],
            share_of_capitalists: vec![0.0; k],
            share_of_group: vec![0.0; k],
        })
        .collect();
    for &(band, behavior, group) in entries {
        if group >= k {
            return Err(Error::Domain(format!("group {group} out of range for k={k}")));
        }
        let slot = SLICES
            .iter()
            .position(|&s| s == (band, behavior))
            .ok_or_else(|| Error::Domain(format!("no slice for ({band}, {behavior})")))?;
        rows[slot].counts[group] += 1;
    }
    for row in &mut rows {
        let total = row.total();
        for (g, &size) in sizes.iter().enumerate() {
            let c = row.counts[g] as f64;
            if total > 0 {
                row.share_of_capitalists[g] = 100.0 * c / total as f64;
            }
            if size > 0 {
                row.share_of_group[g] = 100.0 * c / size as f64;
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star_with(n_in: &[u32], n_out: &[u32]) -> DirectedGraph {
        let n = 1 + n_in.iter().chain(n_out).copied().max().unwrap_or(0) as usize;
        let mut arcs: Vec<(u32, u32)> = n_in.iter().map(|&v| (v, 0)).collect();
        arcs.extend(n_out.iter().map(|&v| (0, v)));
        DirectedGraph::from_arcs(n, arcs).unwrap().0
    }

    #[test]
    fn overlap_examples() {
        let g = star_with(&[1, 2, 3], &[1, 2, 3]);
        assert_eq!(overlap_index(&g, 0).unwrap(), 1.0);
        let g = star_with(&[1, 2], &[3, 4]);
        assert_eq!(overlap_index(&g, 0).unwrap(), 0.0);
        let g = star_with(&[1, 2, 3, 4], &[2, 3, 4, 5, 6]);
        assert_eq!(overlap_index(&g, 0).unwrap(), 0.75);
        let g = star_with(&[1, 2], &[]);
        assert_eq!(overlap_index(&g, 0).unwrap(), 0.0);
    }

    #[test]
    fn ratio_examples() {
        let g = star_with(&[1, 2], &[3, 4]);
        assert_eq!(ratio(&g, 0).unwrap(), 1.0);
        let g = star_with(&[1, 2, 3, 4, 5], &[]);
        assert_eq!(ratio(&g, 0).unwrap(), 0.0);
        assert!(matches!(ratio(&g, 1), Err(Error::UndefinedRatio { node: 1 })));
        assert_eq!(700.0 / 1000.0, PASSIVE_RATIO);
        assert_eq!(classify_record(1000, 700, 1.0).unwrap().1, Behavior::Fmify);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(5000, 1.3).unwrap(), (Band::Low, Behavior::Ifyfm));
        assert_eq!(classify(20000, 0.5).unwrap(), (Band::High, Behavior::Passive));
        assert_eq!(classify(20000, 0.85).unwrap(), (Band::High, Behavior::Fmify));
        assert_eq!(classify(500, 0.3).unwrap(), (Band::Low, Behavior::Fmify));
        assert!(matches!(classify(499, 1.0), Err(Error::BelowDegreeFloor { k_in: 499 })));
    }

    #[test]
    fn detection_degree_floor() {
        let ids: Vec<u32> = (1..=600).collect();
        let g = star_with(&ids, &ids);
        let found = detect_capitalists(&g, &DetectionConfig::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].overlap, 1.0);
        assert_eq!((found[0].band, found[0].behavior), (Band::Low, Behavior::Ifyfm));

        let ids: Vec<u32> = (1..=499).collect();
        let g = star_with(&ids, &ids);
        assert!(detect_capitalists(&g, &DetectionConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn crosstab_split() {
        let mk = |node| CapitalistRecord {
            node,
            k_in: 600,
            k_out: 300,
            overlap: 0.9,
            ratio: 0.5,
            band: Band::Low,
            behavior: Behavior::Fmify,
        };
        let groups: Vec<usize> = (0..100).map(|i| usize::from(i >= 70)).collect();
        let records: Vec<_> = (0..7).chain(70..73).map(mk).collect();
        let rows = crosstab(&records, &groups, 2).unwrap();
        let row = &rows[0];
        assert_eq!(row.counts, vec![7, 3]);
        assert!((row.share_of_capitalists[0] - 70.0).abs() < 1e-12);
        assert!((row.share_of_capitalists[1] - 30.0).abs() < 1e-12);
        assert!((row.share_of_group[0] - 10.0).abs() < 1e-12);
        assert!((row.share_of_group[1] - 10.0).abs() < 1e-12);
        assert!(rows[1..].iter().all(|r| r.share_of_capitalists == vec![0.0, 0.0]));
    }

    #[test]
    fn crosstab_concentration() {
        let records = vec![CapitalistRecord {
            node: 2,
            k_in: 20000,
            k_out: 30000,
            overlap: 1.0,
            ratio: 1.5,
            band: Band::High,
            behavior: Behavior::Ifyfm,
        }];
        let rows = crosstab(&records, &[0, 0, 1], 2).unwrap();
        assert_eq!(rows[4].share_of_capitalists, vec![0.0, 100.0]);
        assert_eq!(rows[4].share_of_group, vec![0.0, 100.0]);
    }
}
