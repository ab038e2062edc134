//! Seeded generators for benchmark graphs and point clouds.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::measures::Matrix;
use crate::partition::Partition;

/// Directed Erdős–Rényi graph: every ordered pair `u != v` is an arc with
/// probability `p`.
pub fn gnp_digraph(n: usize, p: f64, seed: u64) -> DirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::new();
    for u in 0..n as u32 {
        for v in 0..n as u32 {
            if u != v && rng.random::<f64>() < p {
                arcs.push((u, v));
            }
        }
    }
    DirectedGraph::from_arcs(n, arcs).expect("ids in range").0
}

/// Uniform random labels in `0..k`, renumbered contiguously.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k.max(1))).collect();
    Partition::from_labels(&labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCapitalistsConfig {
    /// Background nodes, each following `random_out` uniformly chosen
    /// background nodes.
    pub random_nodes: usize,
    pub random_out: usize,
    /// Planted nodes follow `partners` background nodes, of which a
    /// `follow_back` fraction follow them back.
    pub planted: usize,
    pub partners: usize,
    pub follow_back: f64,
    pub seed: u64,
}

impl Default for PlantedCapitalistsConfig {
    fn default() -> Self {
        Self {
            random_nodes: 10_000,
            random_out: 10,
            planted: 50,
            partners: 600,
            follow_back: 0.9,
            seed: 0,
        }
    }
}

/// Background graph plus planted reciprocal-heavy nodes. Returns the graph
/// and the planted node ids (the last `planted` ids).
pub fn planted_capitalists(cfg: &PlantedCapitalistsConfig) -> Result<(DirectedGraph, Vec<usize>)> {
    let n_bg = cfg.random_nodes;
    if cfg.random_out >= n_bg || cfg.partners > n_bg {
        return Err(Error::Config(format!(
            "{n_bg} background nodes cannot host {} out-arcs or {} partners",
            cfg.random_out, cfg.partners
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut arcs = Vec::with_capacity(n_bg * cfg.random_out + cfg.planted * cfg.partners * 2);
    for u in 0..n_bg {
        for v in sample(&mut rng, n_bg - 1, cfg.random_out) {
            let v = if v >= u { v + 1 } else { v };
            arcs.push((u as u32, v as u32));
        }
    }
    let back = (cfg.follow_back * cfg.partners as f64).ceil() as usize;
    let planted: Vec<usize> = (n_bg..n_bg + cfg.planted).collect();
    for &c in &planted {
        let partners = sample(&mut rng, n_bg, cfg.partners).into_vec();
        for (i, &v) in partners.iter().enumerate() {
            arcs.push((c as u32, v as u32));
            if i < back {
                arcs.push((v as u32, c as u32));
            }
        }
    }
    let (g, _) = DirectedGraph::from_arcs(n_bg + cfg.planted, arcs)?;
    Ok((g, planted))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedNetworkConfig {
    pub nodes: usize,
    pub communities: usize,
    /// Out-arcs per ordinary node.
    pub out_degree: usize,
    /// Probability that an ordinary arc leaves the source's community.
    pub mixing: f64,
    /// Capitalists follow `capitalist_out` nodes drawn from the whole
    /// network; each followee follows back with probability `follow_back`.
    pub capitalists: usize,
    pub capitalist_out: usize,
    pub follow_back: f64,
    pub seed: u64,
}

impl Default for PlantedNetworkConfig {
    fn default() -> Self {
        Self {
            nodes: 50_000,
            communities: 20,
            out_degree: 20,
            mixing: 0.1,
            capitalists: 200,
            capitalist_out: 1_000,
            follow_back: 0.6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedNetwork {
    pub graph: DirectedGraph,
    /// Planted community of each node.
    pub communities: Vec<usize>,
    pub capitalists: Vec<usize>,
}

/// Planted-partition network with mass-following capitalists spread over
/// all communities. Community of node `u` is `u % communities`.
pub fn planted_network(cfg: &PlantedNetworkConfig) -> Result<PlantedNetwork> {
    let (n, c) = (cfg.nodes, cfg.communities);
    if c == 0 || n < 2 * c || cfg.capitalists > n || cfg.capitalist_out >= n {
        return Err(Error::Config(format!(
            "cannot plant {c} communities and {} capitalists in {n} nodes",
            cfg.capitalists
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let communities: Vec<usize> = (0..n).map(|u| u % c).collect();
    let mut capitalists = sample(&mut rng, n, cfg.capitalists).into_vec();
    capitalists.sort_unstable();
    let mut is_capitalist = vec![false; n];
    for &u in &capitalists {
        is_capitalist[u] = true;
    }

    let per_comm = n / c;
    let mut arcs = Vec::with_capacity(n * cfg.out_degree + cfg.capitalists * cfg.capitalist_out * 2);
    for u in 0..n {
        if is_capitalist[u] {
            for v in sample(&mut rng, n - 1, cfg.capitalist_out) {
                let v = if v >= u { v + 1 } else { v };
                arcs.push((u as u32, v as u32));
                if rng.random::<f64>() < cfg.follow_back {
                    arcs.push((v as u32, u as u32));
                }
            }
            continue;
        }
        let own = communities[u];
        for _ in 0..cfg.out_degree {
            let v = if rng.random::<f64>() < cfg.mixing {
                rng.random_range(0..n)
            } else {
                own + c * rng.random_range(0..per_comm)
            };
            arcs.push((u as u32, v as u32));
        }
    }
    let (graph, _) = DirectedGraph::from_arcs(n, arcs)?;
    Ok(PlantedNetwork {
        graph,
        communities,
        capitalists,
    })
}

/// `k` isotropic Gaussian blobs of `per_blob` points in `dim` dimensions,
/// centres at pairwise distance at least `min_separation`. Returns the
/// points and their true blob ids.
pub fn gaussian_blobs(
    k: usize,
    per_blob: usize,
    dim: usize,
    sigma: f64,
    min_separation: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = min_separation * 2.0 * (k.max(1) as f64).powf(1.0 / dim.max(1) as f64);
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while centres.len() < k {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Config(format!(
                "could not place {k} centres {min_separation} apart in {dim} dimensions"
            )));
        }
        let cand: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..side)).collect();
        let far = centres.iter().all(|c| {
            c.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= min_separation * min_separation
        });
        if far {
            centres.push(cand);
        }
    }
    let mut data = Vec::with_capacity(k * per_blob * dim);
    let mut labels = Vec::with_capacity(k * per_blob);
    for (g, centre) in centres.iter().enumerate() {
        for _ in 0..per_blob {
            data.extend(centre.iter().map(|&x| x + normal.sample(&mut rng)));
            labels.push(g);
        }
    }
    Ok((Matrix::from_vec(k * per_blob, dim, data)?, labels))
}
