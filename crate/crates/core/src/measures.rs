//! Community-role measures.
//!
//! For every node and each link direction we tally internal degree, external
//! degree, the number of distinct external communities reached (`eps`) and
//! the spread of link counts over those communities (`lambda`). Each raw
//! quantity is then z-scored within the node's own community, giving eight
//! directional measures: internal intensity, diversity, external intensity
//! and heterogeneity, each split into out- and in-link variants.
//!
//! The Guimerà–Amaral within-module degree and participation coefficient,
//! and Lancichinetti's embeddedness, are provided alongside for comparison.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Direction};
use crate::partition::Partition;

/// Raw counts for one node and one link direction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DirectionalProfile {
    /// Neighbours in the node's own community.
    pub k_int: u32,
    /// Neighbours elsewhere.
    pub k_ext: u32,
    /// Distinct external communities reached.
    pub eps: u32,
    /// Population standard deviation of per-external-community link counts.
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeCommunityProfile {
    pub outgoing: DirectionalProfile,
    pub incoming: DirectionalProfile,
}

impl NodeCommunityProfile {
    pub fn get(&self, dir: Direction) -> &DirectionalProfile {
        match dir {
            Direction::Out => &self.outgoing,
            Direction::In => &self.incoming,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProfileOptions {
    /// Compute lambda over every external community, zero counts included,
    /// instead of only the connected ones.
    pub lambda_include_zeros: bool,
}

/// Column order of a [`MeasureMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    IntIntensityOut,
    IntIntensityIn,
    DiversityOut,
    DiversityIn,
    ExtIntensityOut,
    ExtIntensityIn,
    HeterogeneityOut,
    HeterogeneityIn,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::IntIntensityOut,
        Measure::IntIntensityIn,
        Measure::DiversityOut,
        Measure::DiversityIn,
        Measure::ExtIntensityOut,
        Measure::ExtIntensityIn,
        Measure::HeterogeneityOut,
        Measure::HeterogeneityIn,
    ];

    pub fn column(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::IntIntensityOut => "I_int_out",
            Measure::IntIntensityIn => "I_int_in",
            Measure::DiversityOut => "D_out",
            Measure::DiversityIn => "D_in",
            Measure::ExtIntensityOut => "I_ext_out",
            Measure::ExtIntensityIn => "I_ext_in",
            Measure::HeterogeneityOut => "H_out",
            Measure::HeterogeneityIn => "H_in",
        }
    }

    pub fn from_name(name: &str) -> Option<Measure> {
        Measure::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn direction(self) -> Direction {
        if self.column().is_multiple_of(2) {
            Direction::Out
        } else {
            Direction::In
        }
    }

    /// The raw profile quantity this measure z-scores.
    pub fn raw(self, p: &NodeCommunityProfile) -> f64 {
        let d = p.get(self.direction());
        match self {
            Measure::IntIntensityOut | Measure::IntIntensityIn => d.k_int as f64,
            Measure::DiversityOut | Measure::DiversityIn => d.eps as f64,
            Measure::ExtIntensityOut | Measure::ExtIntensityIn => d.k_ext as f64,
            Measure::HeterogeneityOut | Measure::HeterogeneityIn => d.lambda,
        }
    }

    /// The same measure for the opposite link direction.
    pub fn mirrored(self) -> Measure {
        Measure::ALL[self.column() ^ 1]
    }
}

/// Dense row-major `n x cols` matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// `n x 8` matrix of role measures in [`Measure::ALL`] order.
pub type MeasureMatrix = Matrix;

fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardises `values` in place against their own population mean and
/// deviation. Constant inputs become all-zero.
pub(crate) fn z_scores_in_place(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let (mean, std) = population_mean_std(values);
    if std == 0.0 || !std.is_finite() {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// `(f(u) - mean_C) / std_C` with population statistics over `u`'s
/// community `C`; zero wherever `std_C` is zero.
pub fn z_score_within_community(values: &[f64], p: &Partition) -> Result<Vec<f64>> {
    p.check_covers(values.len())?;
    let mut out = vec![0.0; values.len()];
    let members = p.members();
    let mut scratch = Vec::new();
    for group in &members {
        scratch.clear();
        scratch.extend(group.iter().map(|&u| values[u as usize]));
        z_scores_in_place(&mut scratch);
        for (&u, &z) in group.iter().zip(&scratch) {
            out[u as usize] = z;
        }
    }
    Ok(out)
}

#[derive(Default)]
struct Scratch {
    comms: Vec<u32>,
    counts: Vec<f64>,
}

fn directional_profile(
    g: &DirectedGraph,
    p: &Partition,
    u: usize,
    dir: Direction,
    opts: ProfileOptions,
    scratch: &mut Scratch,
) -> DirectionalProfile {
    let own = p.community(u) as u32;
    let comms = &mut scratch.comms;
    comms.clear();
    comms.extend(
        g.neighbors(u, dir)
            .iter()
            .map(|&v| p.assignment()[v as usize])
            .filter(|&c| c != own),
    );
    let k_total = g.neighbors(u, dir).len() as u32;
    let k_ext = comms.len() as u32;
    comms.sort_unstable();

    let counts = &mut scratch.counts;
    counts.clear();
    counts.extend(comms.chunk_by(|a, b| a == b).map(|run| run.len() as f64));
    let eps = counts.len() as u32;
    if opts.lambda_include_zeros {
        counts.resize(p.n_comms().saturating_sub(1).max(counts.len()), 0.0);
    }
    let lambda = if counts.len() <= 1 {
        0.0
    } else {
        population_mean_std(counts).1
    };

    DirectionalProfile {
        k_int: k_total - k_ext,
        k_ext,
        eps,
        lambda,
    }
}

pub fn community_profile(
    g: &DirectedGraph,
    p: &Partition,
    opts: ProfileOptions,
) -> Result<Vec<NodeCommunityProfile>> {
    g.check_partition(p)?;
    Ok((0..g.n())
        .into_par_iter()
        .map_init(Scratch::default, |scratch, u| NodeCommunityProfile {
            outgoing: directional_profile(g, p, u, Direction::Out, opts, scratch),
            incoming: directional_profile(g, p, u, Direction::In, opts, scratch),
        })
        .collect())
}

/// Z-scores each raw profile column within communities.
pub fn measures_from_profiles(profiles: &[NodeCommunityProfile], p: &Partition) -> Result<MeasureMatrix> {
    let mut mat = Matrix::zeros(profiles.len(), Measure::ALL.len());
    let columns: Vec<Vec<f64>> = Measure::ALL
        .par_iter()
        .map(|m| {
            let raw: Vec<f64> = profiles.iter().map(|pr| m.raw(pr)).collect();
            z_score_within_community(&raw, p)
        })
        .collect::<Result<_>>()?;
    for (j, col) in columns.iter().enumerate() {
        mat.set_column(j, col);
    }
    Ok(mat)
}

pub fn role_measures(g: &DirectedGraph, p: &Partition, opts: ProfileOptions) -> Result<MeasureMatrix> {
    let profiles = community_profile(g, p, opts)?;
    measures_from_profiles(&profiles, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddednessScope {
    In,
    Out,
    Total,
}

/// Fraction of `u`'s links, in the chosen scope, that stay in its community.
pub fn embeddedness(g: &DirectedGraph, p: &Partition, u: usize, scope: EmbeddednessScope) -> Result<f64> {
    g.check_node(u)?;
    g.check_partition(p)?;
    let own = p.community(u);
    let count = |dir: Direction| {
        let nb = g.neighbors(u, dir);
        let internal = nb.iter().filter(|&&v| p.community(v as usize) == own).count();
        (internal, nb.len())
    };
    let (k_int, k) = match scope {
        EmbeddednessScope::In => count(Direction::In),
        EmbeddednessScope::Out => count(Direction::Out),
        EmbeddednessScope::Total => {
            let (a, b) = count(Direction::In);
            let (c, d) = count(Direction::Out);
            (a + c, b + d)
        }
    };
    if k == 0 {
        return Err(Error::UndefinedEmbeddedness { node: u });
    }
    Ok(k_int as f64 / k as f64)
}

/// `1 - sum_C (k_C / k)^2` over combined in- and out-links; zero for an
/// isolated node.
pub fn participation_coefficient(g: &DirectedGraph, p: &Partition, u: usize) -> Result<f64> {
    g.check_node(u)?;
    g.check_partition(p)?;
    let mut comms: Vec<u32> = g
        .in_neighbors(u)
        .iter()
        .chain(g.out_neighbors(u))
        .map(|&v| p.assignment()[v as usize])
        .collect();
    Ok(participation_of(&mut comms))
}

fn participation_of(comms: &mut [u32]) -> f64 {
    if comms.is_empty() {
        return 0.0;
    }
    comms.sort_unstable();
    let k = comms.len() as f64;
    let mut sum_sq = 0.0;
    for run in comms.chunk_by(|a, b| a == b) {
        let share = run.len() as f64 / k;
        sum_sq += share * share;
    }
    (1.0 - sum_sq).max(0.0)
}

/// Per-node embeddedness (total scope, `None` for isolated nodes) and
/// participation coefficient.
pub fn node_summaries(g: &DirectedGraph, p: &Partition) -> Result<Vec<(Option<f64>, f64)>> {
    g.check_partition(p)?;
    Ok((0..g.n())
        .into_par_iter()
        .map(|u| {
            let e = embeddedness(g, p, u, EmbeddednessScope::Total).ok();
            let pc = participation_coefficient(g, p, u).expect("node and partition checked");
            (e, pc)
        })
        .collect())
}

/// The seven Guimerà–Amaral roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GaRole {
    UltraPeripheral,
    Peripheral,
    NonHubConnector,
    NonHubKinless,
    ProvincialHub,
    ConnectorHub,
    KinlessHub,
}

impl GaRole {
    pub fn is_hub(self) -> bool {
        matches!(self, GaRole::ProvincialHub | GaRole::ConnectorHub | GaRole::KinlessHub)
    }

    pub fn name(self) -> &'static str {
        match self {
            GaRole::UltraPeripheral => "ultra-peripheral",
            GaRole::Peripheral => "peripheral",
            GaRole::NonHubConnector => "connector",
            GaRole::NonHubKinless => "kinless",
            GaRole::ProvincialHub => "provincial hub",
            GaRole::ConnectorHub => "connector hub",
            GaRole::KinlessHub => "kinless hub",
        }
    }
}

/// Cut points on the (z, P) plane. A node with `P <= cut[i]` falls in band
/// `i`; above the last cut it falls in the last band.
#[derive(Debug, Clone, PartialEq)]
pub struct GaThresholds {
    pub hub_z: f64,
    pub non_hub: Vec<f64>,
    pub hub: Vec<f64>,
}

impl Default for GaThresholds {
    fn default() -> Self {
        // Published Guimerà–Amaral values; only hub_z comes with the method
        // used here, the P cuts are external constants.
        Self {
            hub_z: 2.5,
            non_hub: vec![0.05, 0.62, 0.80],
            hub: vec![0.30, 0.75],
        }
    }
}

impl GaThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = |cuts: &[f64], len: usize| {
            cuts.len() == len
                && cuts.iter().all(|c| (0.0..=1.0).contains(c))
                && cuts.windows(2).all(|w| w[0] < w[1])
        };
        if !self.hub_z.is_finite() || !ok(&self.non_hub, 3) || !ok(&self.hub, 2) {
            return Err(Error::Config(format!(
                "GA thresholds need 3 ascending non-hub and 2 ascending hub cuts in [0,1]: {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn ga_role(z: f64, participation: f64, t: &GaThresholds) -> Result<GaRole> {
    t.validate()?;
    let band = |cuts: &[f64]| cuts.iter().take_while(|&&c| participation > c).count();
    Ok(if z >= t.hub_z {
        [GaRole::ProvincialHub, GaRole::ConnectorHub, GaRole::KinlessHub][band(&t.hub)]
    } else {
        [
            GaRole::UltraPeripheral,
            GaRole::Peripheral,
            GaRole::NonHubConnector,
            GaRole::NonHubKinless,
        ][band(&t.non_hub)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> (DirectedGraph, Partition) {
        let arcs = vec![(0, 1), (1, 0), (1, 2), (0, 3), (4, 0), (3, 4), (4, 5), (5, 3)];
        (
            DirectedGraph::from_arcs(6, arcs).unwrap().0,
            Partition::from_labels(&[0, 0, 0, 1, 1, 1]),
        )
    }

    #[test]
    fn z_score_examples() {
        let p = Partition::from_labels(&[0, 0, 0, 1, 1, 1, 2]);
        let z = z_score_within_community(&[1.0, 1.0, 4.0, 5.0, 5.0, 5.0, 7.0], &p).unwrap();
        let s = 2f64.sqrt();
        assert!((z[0] + 1.0 / s).abs() < 1e-12);
        assert!((z[1] + 1.0 / s).abs() < 1e-12);
        assert!((z[2] - s).abs() < 1e-12);
        assert_eq!(&z[3..], &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn z_score_of_constant_fraction_is_zero() {
        let p = Partition::whole(3);
        let z = z_score_within_community(&[0.1, 0.1, 0.1], &p).unwrap();
        assert_eq!(z, vec![0.0; 3]);
    }

    #[test]
    fn profile_g1_node0() {
        let (g, p) = g1();
        let prof = community_profile(&g, &p, ProfileOptions::default()).unwrap();
        let expect = DirectionalProfile {
            k_int: 1,
            k_ext: 1,
            eps: 1,
            lambda: 0.0,
        };
        assert_eq!(prof[0].outgoing, expect);
        assert_eq!(prof[0].incoming, expect);
        // node 2 only receives one internal link
        assert_eq!(prof[2].outgoing, DirectionalProfile::default());
        assert_eq!(prof[2].incoming.k_int, 1);
    }

    #[test]
    fn lambda_of_uneven_spread() {
        // node 0 in community 0; out-links: 3 to community 1, 1 to community 2
        let arcs = vec![(0, 1), (0, 2), (0, 3), (0, 4)];
        let (g, _) = DirectedGraph::from_arcs(5, arcs).unwrap();
        let p = Partition::from_labels(&[0, 1, 1, 1, 2]);
        let prof = community_profile(&g, &p, ProfileOptions::default()).unwrap();
        assert_eq!(prof[0].outgoing.eps, 2);
        assert_eq!(prof[0].outgoing.k_ext, 4);
        assert!((prof[0].outgoing.lambda - 1.0).abs() < 1e-15);

        // including zeros: counts {3,1} over 2 external communities is the same
        let opts = ProfileOptions {
            lambda_include_zeros: true,
        };
        let prof = community_profile(&g, &p, opts).unwrap();
        assert!((prof[0].outgoing.lambda - 1.0).abs() < 1e-15);
        // node 1 reaches nothing, two external communities → std of {0,0}
        assert_eq!(prof[1].outgoing.lambda, 0.0);
    }

    #[test]
    fn lambda_zero_inclusion_changes_value() {
        // 4 communities; node 0 sends 2 links to community 1 only
        let (g, _) = DirectedGraph::from_arcs(5, vec![(0, 1), (0, 2)]).unwrap();
        let p = Partition::from_labels(&[0, 1, 1, 2, 3]);
        let plain = community_profile(&g, &p, ProfileOptions::default()).unwrap();
        assert_eq!(plain[0].outgoing.lambda, 0.0);
        let zeros = community_profile(&g, &p, ProfileOptions { lambda_include_zeros: true }).unwrap();
        // std of {2,0,0}
        let expect = (8.0f64 / 9.0).sqrt();
        assert!((zeros[0].outgoing.lambda - expect).abs() < 1e-12);
    }

    #[test]
    fn internal_intensity_on_g1() {
        let (g, p) = g1();
        let m = role_measures(&g, &p, ProfileOptions::default()).unwrap();
        // k_int_out over C0 is {1, 2, 0}
        let expect = (2.0 - 1.0) / (2.0f64 / 3.0).sqrt();
        assert!((m.get(1, Measure::IntIntensityOut.column()) - expect).abs() < 1e-12);
    }

    #[test]
    fn identical_profiles_give_zero_rows() {
        let arcs = vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)];
        let (g, _) = DirectedGraph::from_arcs(6, arcs).unwrap();
        let p = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        let m = role_measures(&g, &p, ProfileOptions::default()).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embeddedness_examples() {
        let (g, p) = g1();
        assert_eq!(embeddedness(&g, &p, 0, EmbeddednessScope::Total).unwrap(), 0.5);
        assert_eq!(embeddedness(&g, &p, 2, EmbeddednessScope::Total).unwrap(), 1.0);
        let (g2, _) = DirectedGraph::from_arcs(3, vec![(0, 1)]).unwrap();
        let p2 = Partition::from_labels(&[0, 1, 2]);
        assert_eq!(embeddedness(&g2, &p2, 0, EmbeddednessScope::Out).unwrap(), 0.0);
        assert!(matches!(
            embeddedness(&g2, &p2, 2, EmbeddednessScope::Total),
            Err(Error::UndefinedEmbeddedness { node: 2 })
        ));
        assert!(embeddedness(&g2, &p2, 0, EmbeddednessScope::In).is_err());
    }

    #[test]
    fn participation_examples() {
        let (g, p) = g1();
        assert_eq!(participation_coefficient(&g, &p, 0).unwrap(), 0.5);
        assert_eq!(participation_coefficient(&g, &p, 2).unwrap(), 0.0);
        let (star, _) = DirectedGraph::from_arcs(5, vec![(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let p = Partition::from_labels(&[0, 1, 2, 3, 4]);
        assert_eq!(participation_coefficient(&star, &p, 0).unwrap(), 0.75);
        let (empty, _) = DirectedGraph::from_arcs(1, vec![]).unwrap();
        assert_eq!(participation_coefficient(&empty, &Partition::whole(1), 0).unwrap(), 0.0);
    }

    #[test]
    fn ga_role_examples() {
        let t = GaThresholds::default();
        assert_eq!(ga_role(3.0, 0.0, &t).unwrap(), GaRole::ProvincialHub);
        assert_eq!(ga_role(0.0, 0.0, &t).unwrap(), GaRole::UltraPeripheral);
        assert!(ga_role(2.5, 0.5, &t).unwrap().is_hub());
        assert_eq!(ga_role(2.5, 0.5, &t).unwrap(), GaRole::ConnectorHub);
        assert_eq!(ga_role(2.49, 0.5, &t).unwrap(), GaRole::Peripheral);
        assert_eq!(ga_role(0.0, 0.05, &t).unwrap(), GaRole::UltraPeripheral);
        assert_eq!(ga_role(0.0, 0.7, &t).unwrap(), GaRole::NonHubConnector);
        assert_eq!(ga_role(0.0, 0.9, &t).unwrap(), GaRole::NonHubKinless);
        assert_eq!(ga_role(5.0, 0.8, &t).unwrap(), GaRole::KinlessHub);
        let bad = GaThresholds {
            non_hub: vec![0.6, 0.05, 0.8],
            ..GaThresholds::default()
        };
        assert!(matches!(ga_role(0.0, 0.1, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(Measure::from_name(m.name()), Some(m));
            assert_eq!(m.mirrored().mirrored(), m);
            assert_ne!(m.mirrored().direction(), m.direction());
        }
    }
}
