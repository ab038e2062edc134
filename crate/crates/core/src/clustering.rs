//! Role groups: standardisation, k-means, Davies–Bouldin model selection
//! and rule-based role labels.
//!
//! k-means runs on a canonically row-sorted copy of the data, so results do
//! not depend on input row order. Per-point work is split into fixed-size
//! chunks whose partial sums are reduced in chunk order, so results do not
//! depend on the worker count either.

use std::cmp::Ordering;
use std::fmt;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Direction;
use crate::measures::{z_scores_in_place, Matrix, Measure};

const CHUNK: usize = 2048;

/// Centres every column on its mean and scales it to unit population
/// deviation. Constant columns become zero.
pub fn standardize(mat: &Matrix) -> Matrix {
    let mut out = mat.clone();
    for j in 0..mat.cols() {
        let mut col = mat.column(j);
        z_scores_in_place(&mut col);
        out.set_column(j, &col);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    /// Seeded initialisations; the lowest-inertia run is kept.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub k: usize,
    pub assign: Vec<usize>,
    /// `k x d` group means.
    pub centroids: Matrix,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    /// `None` when undefined (k < 2 or coincident centroids).
    pub db_index: Option<f64>,
    /// Inertia after every assignment step of the kept run.
    pub inertia_trace: Vec<f64>,
}

impl ClusteringResult {
    /// Groups given by `assign` with centroids set to the group means.
    pub fn from_assignment(mat: &Matrix, assign: Vec<usize>, k: usize) -> Result<Self> {
        if assign.len() != mat.rows() {
            return Err(Error::Domain(format!(
                "{} labels for {} points",
                assign.len(),
                mat.rows()
            )));
        }
        if let Some(&bad) = assign.iter().find(|&&g| g >= k) {
            return Err(Error::Domain(format!("group {bad} out of range for k={k}")));
        }
        let (sums, counts) = accumulate(mat, &assign, k);
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::DegenerateClustering(format!("group {empty} is empty")));
        }
        let centroids = means(&sums, &counts, mat.cols());
        let inertia = (0..mat.rows())
            .map(|i| sq_dist(mat.row(i), centroids.row(assign[i])))
            .sum();
        let mut res = Self {
            k,
            assign,
            centroids,
            inertia,
            db_index: None,
            inertia_trace: Vec::new(),
        };
        res.db_index = davies_bouldin(mat, &res).ok();
        Ok(res)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &g in &self.assign {
            sizes[g] += 1;
        }
        sizes
    }

    /// Renumbers groups by descending size (ties keep the lower old id).
    pub fn renumbered_by_size(&self) -> Self {
        let sizes = self.sizes();
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        let mut new_id = vec![0; self.k];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let mut centroids = Matrix::zeros(self.k, self.centroids.cols());
        for (new, &old) in order.iter().enumerate() {
            centroids.row_mut(new).copy_from_slice(self.centroids.row(old));
        }
        Self {
            k: self.k,
            assign: self.assign.iter().map(|&g| new_id[g]).collect(),
            centroids,
            inertia: self.inertia,
            db_index: self.db_index,
            inertia_trace: self.inertia_trace.clone(),
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest id.
#[inline]
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn accumulate(mat: &Matrix, assign: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let d = mat.cols();
    let partials: Vec<(Vec<f64>, Vec<usize>)> = (0..mat.rows())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut sums = vec![0.0; k * d];
            let mut counts = vec![0; k];
            for &i in idx {
                let g = assign[i];
                counts[g] += 1;
                for (s, x) in sums[g * d..(g + 1) * d].iter_mut().zip(mat.row(i)) {
                    *s += x;
                }
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0; k];
    for (s, c) in partials {
        sums.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        counts.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
    }
    (sums, counts)
}

fn means(sums: &[f64], counts: &[usize], d: usize) -> Matrix {
    let k = counts.len();
    let mut m = Matrix::zeros(k, d);
    for g in 0..k {
        if counts[g] > 0 {
            for (j, v) in m.row_mut(g).iter_mut().enumerate() {
                *v = sums[g * d + j] / counts[g] as f64;
            }
        }
    }
    m
}

struct AssignStep {
    assign: Vec<usize>,
    dist: Vec<f64>,
    inertia: f64,
}

fn assign_step(mat: &Matrix, centroids: &Matrix) -> AssignStep {
    let chunks: Vec<(Vec<usize>, Vec<f64>, f64)> = (0..mat.rows())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut a = Vec::with_capacity(idx.len());
            let mut dist = Vec::with_capacity(idx.len());
            let mut inertia = 0.0;
            for &i in idx {
                let (g, d) = nearest(mat.row(i), centroids);
                a.push(g);
                dist.push(d);
                inertia += d;
            }
            (a, dist, inertia)
        })
        .collect();
    let mut step = AssignStep {
        assign: Vec::with_capacity(mat.rows()),
        dist: Vec::with_capacity(mat.rows()),
        inertia: 0.0,
    };
    for (a, d, inertia) in chunks {
        step.assign.extend(a);
        step.dist.extend(d);
        step.inertia += inertia;
    }
    step
}

/// Seeded k-means++: each new centre is drawn with probability proportional
/// to the squared distance to the nearest centre already chosen, which also
/// guarantees distinct centres.
fn init_centroids(mat: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let n = mat.rows();
    let mut centroids = Matrix::zeros(k, mat.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(mat.row(first));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(mat.row(i), mat.row(first))).collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateClustering(format!(
                "fewer than {k} distinct points"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in best.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        let pick = pick.expect("positive total has a positive entry");
        centroids.row_mut(c).copy_from_slice(mat.row(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(mat.row(i), mat.row(pick)));
        }
    }
    Ok(centroids)
}

/// Replaces empty groups' centroids with the points farthest from their
/// current centroids. Returns whether anything was repaired.
fn repair_empty(mat: &Matrix, centroids: &mut Matrix, counts: &[usize], dist: &[f64]) -> bool {
    let empty: Vec<usize> = (0..counts.len()).filter(|&g| counts[g] == 0).collect();
    if empty.is_empty() {
        return false;
    }
    let mut by_dist: Vec<usize> = (0..mat.rows()).collect();
    by_dist.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    for (g, &i) in empty.iter().zip(&by_dist) {
        centroids.row_mut(*g).copy_from_slice(mat.row(i));
    }
    true
}

fn lloyd(mat: &Matrix, mut centroids: Matrix, cfg: &KMeansConfig) -> Result<ClusteringResult> {
    let k = centroids.rows();
    let d = mat.cols();
    let mut trace = Vec::new();
    let mut finishing = false;
    let mut iterations = 0;
    // Repairs can postpone convergence; bound the total work anyway.
    let hard_cap = 2 * cfg.max_iter + k + 2;

    loop {
        let step = assign_step(mat, &centroids);
        trace.push(step.inertia);
        let (sums, counts) = accumulate(mat, &step.assign, k);
        let new_centroids = means(&sums, &counts, d);
        let mut repaired = new_centroids.clone();
        if repair_empty(mat, &mut repaired, &counts, &step.dist) {
            if trace.len() > hard_cap {
                return Err(Error::DegenerateClustering(format!(
                    "could not keep {k} groups non-empty"
                )));
            }
            centroids = repaired;
            finishing = false;
            continue;
        }
        if finishing {
            return Ok(ClusteringResult {
                k,
                assign: step.assign,
                centroids,
                inertia: step.inertia,
                db_index: None,
                inertia_trace: trace,
            });
        }
        let movement = (0..k)
            .map(|g| sq_dist(centroids.row(g), new_centroids.row(g)).sqrt())
            .fold(0.0, f64::max);
        centroids = new_centroids;
        iterations += 1;
        if movement < cfg.tol || iterations >= cfg.max_iter || trace.len() > hard_cap {
            // one more assignment against the final centroids
            finishing = true;
        }
    }
}

/// Rows sorted lexicographically; returns the permutation (sorted position
/// to original row).
fn canonical_order(mat: &Matrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mat.rows()).collect();
    order.par_sort_by(|&a, &b| {
        mat.row(a)
            .iter()
            .zip(mat.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    order
}

pub fn kmeans(mat: &Matrix, k: usize, cfg: &KMeansConfig) -> Result<ClusteringResult> {
    let n = mat.rows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k={k} must lie in [1, {n}]")));
    }
    if cfg.max_iter == 0 || !(cfg.tol >= 0.0) {
        return Err(Error::Config("k-means needs max_iter >= 1 and tol >= 0".into()));
    }
    let order = canonical_order(mat);
    let mut sorted = Matrix::zeros(n, mat.cols());
    for (pos, &i) in order.iter().enumerate() {
        sorted.row_mut(pos).copy_from_slice(mat.row(i));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<ClusteringResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let init = init_centroids(&sorted, k, &mut rng)?;
        let run = lloyd(&sorted, init, cfg)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");

    let mut assign = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assign[i] = best.assign[pos];
    }
    best.assign = assign;
    best.db_index = if k >= 2 { davies_bouldin(mat, &best).ok() } else { None };
    Ok(best)
}

/// `DB = 1/k * sum_i max_{j != i} (s_i + s_j) / d_ij`, with `s_i` the mean
/// Euclidean distance of group `i` to its centroid and `d_ij` the distance
/// between centroids.
pub fn davies_bouldin(mat: &Matrix, res: &ClusteringResult) -> Result<f64> {
    let k = res.k;
    if k < 2 {
        return Err(Error::UndefinedIndex(format!("needs at least 2 groups, got {k}")));
    }
    let mut scatter = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (i, &g) in res.assign.iter().enumerate() {
        scatter[g] += sq_dist(mat.row(i), res.centroids.row(g)).sqrt();
        counts[g] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::UndefinedIndex(format!("group {empty} is empty")));
    }
    for (s, &c) in scatter.iter_mut().zip(&counts) {
        *s /= c as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let dij = sq_dist(res.centroids.row(i), res.centroids.row(j)).sqrt();
            if dij == 0.0 {
                return Err(Error::DegenerateClustering(format!(
                    "centroids {i} and {j} coincide"
                )));
            }
            worst = worst.max((scatter[i] + scatter[j]) / dij);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KScore {
    pub k: usize,
    pub inertia: Option<f64>,
    pub db_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub best: ClusteringResult,
    pub scores: Vec<KScore>,
}

/// Runs k-means for every `k` in range and keeps the lowest Davies–Bouldin
/// index, ties going to the smaller `k`. Values of `k` whose clustering is
/// degenerate are scored as undefined and skipped.
pub fn select_k(mat: &Matrix, k_range: RangeInclusive<usize>, cfg: &KMeansConfig) -> Result<KSelection> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || lo > hi || hi > mat.rows() {
        return Err(Error::Config(format!(
            "k range [{lo}, {hi}] must satisfy 2 <= k_min <= k_max <= n = {}",
            mat.rows()
        )));
    }
    let mut scores = Vec::new();
    let mut best: Option<ClusteringResult> = None;
    for k in k_range {
        let res = match kmeans(mat, k, cfg) {
            Ok(r) => r,
            Err(Error::DegenerateClustering(msg)) => {
                log::info!("k={k} skipped: {msg}");
                scores.push(KScore {
                    k,
                    inertia: None,
                    db_index: None,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        scores.push(KScore {
            k,
            inertia: Some(res.inertia),
            db_index: res.db_index,
        });
        if let Some(db) = res.db_index {
            if best.as_ref().is_none_or(|b| db < b.db_index.expect("kept results are scored")) {
                best = Some(res);
            }
        }
    }
    match best {
        Some(best) => Ok(KSelection { best, scores }),
        None => Err(Error::DegenerateClustering(format!(
            "no k in [{lo}, {hi}] gives a well-defined Davies-Bouldin index"
        ))),
    }
}

/// Heuristic cut-offs for naming groups from their centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelThresholds {
    /// Pivot iff the larger internal intensity reaches this.
    pub pivot: f64,
    /// Connector iff the larger diversity reaches this and some external
    /// intensity is positive.
    pub connector: f64,
    /// Orphan iff the mean of all eight coordinates reaches this.
    pub orphan: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            pivot: 1.0,
            connector: 0.5,
            orphan: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoleLabel {
    PivotOrphan,
    PivotConnector,
    PivotProvincial,
    NonPivotOrphan,
    NonPivotConnector,
    NonPivotUltraPeripheral,
    /// Peripheral, qualified by the dominant positive diversity direction.
    NonPivotPeripheral(Option<Direction>),
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleLabel::PivotOrphan => "pivot orphelin",
            RoleLabel::PivotConnector => "pivot connecteur",
            RoleLabel::PivotProvincial => "pivot provincial",
            RoleLabel::NonPivotOrphan => "non-pivot orphelin",
            RoleLabel::NonPivotConnector => "non-pivot connecteur",
            RoleLabel::NonPivotUltraPeripheral => "non-pivot ultra-périphérique",
            RoleLabel::NonPivotPeripheral(Some(Direction::In)) => "non-pivot périphérique (entrant)",
            RoleLabel::NonPivotPeripheral(Some(Direction::Out)) => "non-pivot périphérique (sortant)",
            RoleLabel::NonPivotPeripheral(None) => "non-pivot périphérique",
        })
    }
}

pub fn label_role(centroid: &[f64], t: &LabelThresholds) -> Result<RoleLabel> {
    if centroid.len() != Measure::ALL.len() {
        return Err(Error::Domain(format!(
            "centroid has {} coordinates, expected 8",
            centroid.len()
        )));
    }
    let at = |m: Measure| centroid[m.column()];
    let pivot = at(Measure::IntIntensityOut).max(at(Measure::IntIntensityIn)) >= t.pivot;
    let orphan = centroid.iter().sum::<f64>() / centroid.len() as f64 >= t.orphan;
    let (d_out, d_in) = (at(Measure::DiversityOut), at(Measure::DiversityIn));
    let connector = d_out.max(d_in) >= t.connector
        && at(Measure::ExtIntensityOut).max(at(Measure::ExtIntensityIn)) > 0.0;

    Ok(match (pivot, orphan, connector) {
        (true, true, _) => RoleLabel::PivotOrphan,
        (true, false, true) => RoleLabel::PivotConnector,
        (true, false, false) => RoleLabel::PivotProvincial,
        (false, true, _) => RoleLabel::NonPivotOrphan,
        (false, false, true) => RoleLabel::NonPivotConnector,
        (false, false, false) if centroid.iter().all(|&v| v < 0.0) => RoleLabel::NonPivotUltraPeripheral,
        (false, false, false) => {
            let dir = if d_out <= 0.0 && d_in <= 0.0 {
                None
            } else if d_out >= d_in {
                Some(Direction::Out)
            } else {
                Some(Direction::In)
            };
            RoleLabel::NonPivotPeripheral(dir)
        }
    })
}
