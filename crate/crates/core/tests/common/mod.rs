//! Brute-force reference implementations computed straight from arc lists.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

pub struct NaiveGraph {
    pub n: usize,
    pub arcs: Vec<(usize, usize)>,
}

impl NaiveGraph {
    pub fn from_graph(g: &role_forge::DirectedGraph) -> Self {
        Self {
            n: g.n(),
            arcs: g.arcs().map(|(u, v, _)| (u as usize, v as usize)).collect(),
        }
    }

    pub fn out_set(&self, u: usize) -> HashSet<usize> {
        self.arcs.iter().filter(|a| a.0 == u).map(|a| a.1).collect()
    }

    pub fn in_set(&self, u: usize) -> HashSet<usize> {
        self.arcs.iter().filter(|a| a.1 == u).map(|a| a.0).collect()
    }

    /// `out = true` for followees, false for followers.
    pub fn neighbours(&self, u: usize, out: bool) -> HashSet<usize> {
        if out {
            self.out_set(u)
        } else {
            self.in_set(u)
        }
    }
}

/// `(k_int, k_ext, eps, lambda)` of one node in one direction.
pub fn profile(g: &NaiveGraph, labels: &[usize], u: usize, out: bool) -> (f64, f64, f64, f64) {
    let mut k_int = 0.0;
    let mut per: BTreeMap<usize, f64> = BTreeMap::new();
    for v in g.neighbours(u, out) {
        if labels[v] == labels[u] {
            k_int += 1.0;
        } else {
            *per.entry(labels[v]).or_default() += 1.0;
        }
    }
    let k_ext: f64 = per.values().sum();
    let eps = per.len() as f64;
    let lambda = if per.is_empty() {
        0.0
    } else {
        let mean = k_ext / eps;
        (per.values().map(|c| (c - mean).powi(2)).sum::<f64>() / eps).sqrt()
    };
    (k_int, k_ext, eps, lambda)
}

/// Population z-scores within label classes; constant classes give 0.
pub fn zscores(values: &[f64], labels: &[usize]) -> Vec<f64> {
    (0..values.len())
        .map(|u| {
            let members: Vec<f64> = (0..values.len())
                .filter(|&v| labels[v] == labels[u])
                .map(|v| values[v])
                .collect();
            if members.iter().all(|&x| x == members[0]) {
                return 0.0;
            }
            let n = members.len() as f64;
            let mean = members.iter().sum::<f64>() / n;
            let sd = (members.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            (values[u] - mean) / sd
        })
        .collect()
}

/// The 8 measure columns, column-major, in the library's order.
pub fn measures(g: &NaiveGraph, labels: &[usize]) -> Vec<Vec<f64>> {
    let mut cols = Vec::new();
    for field in 0..4 {
        for out in [true, false] {
            let raw: Vec<f64> = (0..g.n)
                .map(|u| {
                    let p = profile(g, labels, u, out);
                    [p.0, p.2, p.1, p.3][field]
                })
                .collect();
            cols.push(zscores(&raw, labels));
        }
    }
    cols
}

pub fn embeddedness(g: &NaiveGraph, labels: &[usize], u: usize) -> Option<f64> {
    let (o, i) = (profile(g, labels, u, true), profile(g, labels, u, false));
    let k = o.0 + o.1 + i.0 + i.1;
    (k > 0.0).then(|| (o.0 + i.0) / k)
}

pub fn participation(g: &NaiveGraph, labels: &[usize], u: usize) -> f64 {
    let mut per: BTreeMap<usize, f64> = BTreeMap::new();
    for v in g.out_set(u).into_iter().chain(g.in_set(u)) {
        *per.entry(labels[v]).or_default() += 1.0;
    }
    let k: f64 = per.values().sum();
    if k == 0.0 {
        return 0.0;
    }
    1.0 - per.values().map(|c| (c / k).powi(2)).sum::<f64>()
}

pub fn overlap(g: &NaiveGraph, u: usize) -> f64 {
    let (i, o) = (g.in_set(u), g.out_set(u));
    let min = i.len().min(o.len());
    if min == 0 {
        0.0
    } else {
        i.intersection(&o).count() as f64 / min as f64
    }
}

pub fn ratio(g: &NaiveGraph, u: usize) -> Option<f64> {
    let k_in = g.in_set(u).len();
    (k_in > 0).then(|| g.out_set(u).len() as f64 / k_in as f64)
}

/// Directed modularity by the double sum over node pairs.
pub fn modularity(g: &NaiveGraph, labels: &[usize]) -> f64 {
    let m = g.arcs.len() as f64;
    let mut a = vec![vec![0.0; g.n]; g.n];
    let (mut kout, mut kin) = (vec![0.0; g.n], vec![0.0; g.n]);
    for &(u, v) in &g.arcs {
        a[u][v] += 1.0;
        kout[u] += 1.0;
        kin[v] += 1.0;
    }
    let mut q = 0.0;
    for u in 0..g.n {
        for v in 0..g.n {
            if labels[u] == labels[v] {
                q += a[u][v] - kout[u] * kin[v] / m;
            }
        }
    }
    q / m
}

/// Best modularity over all set partitions (restricted growth strings).
pub fn exhaustive_best_modularity(g: &NaiveGraph) -> f64 {
    let n = g.n;
    let mut labels = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    fn rec(g: &NaiveGraph, labels: &mut Vec<usize>, i: usize, max: usize, best: &mut f64) {
        if i == labels.len() {
            *best = best.max(modularity(g, labels));
            return;
        }
        for c in 0..=max + 1 {
            labels[i] = c;
            rec(g, labels, i + 1, max.max(c), best);
        }
    }
    if n == 0 {
        return 0.0;
    }
    rec(g, &mut labels, 1, 0, &mut best);
    best
}
