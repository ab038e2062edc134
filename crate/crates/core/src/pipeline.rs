//! End-to-end run: ingest, communities, measures, clustering, capitalists,
//! statistics and report, driven by one flat `key = value` configuration.
//!
//! Every artifact starts with a `# role-forge config_hash=...` line. The
//! hash covers the canonical configuration (output directory excluded) and
//! the SHA-256 of each input file, so identical inputs and settings give
//! byte-identical artifacts.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::capitalists::{detect_capitalists, CapitalistRecord, DetectionConfig};
use crate::clustering::{select_k, standardize, ClusteringResult, KMeansConfig, KScore, LabelThresholds};
use crate::error::{Error, Result};
use crate::graph::{load_edge_list, ArcConvention, DirectedGraph, LoadedGraph};
use crate::louvain::{louvain_directed, LouvainConfig, LouvainTrace, SweepOrder};
use crate::measures::{
    community_profile, ga_role, measures_from_profiles, node_summaries, z_score_within_community, GaRole,
    GaThresholds, Matrix, Measure, ProfileOptions,
};
use crate::partition::{save_partition, Partition};
use crate::report::{self, files, CapitalistRow, GroupSummary, MeasuresTable, ReportData};
use crate::stats::{one_way_anova, pairwise_t_bonferroni, AnovaResult, PairwiseTests};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub direction: ArcConvention,
    pub output_dir: PathBuf,
    /// Seeds Louvain restarts and k-means initialisation.
    pub seed: u64,
    pub min_gain: f64,
    pub louvain_order: SweepOrder,
    pub louvain_restarts: usize,
    pub louvain_max_levels: Option<usize>,
    pub lambda_include_zeros: bool,
    pub ga: GaThresholds,
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub kmeans_restarts: usize,
    pub labels: LabelThresholds,
    pub overlap_min: f64,
    pub in_degree_min: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let louvain = LouvainConfig::default();
        let kmeans = KMeansConfig::default();
        let detection = DetectionConfig::default();
        Self {
            input: PathBuf::new(),
            direction: ArcConvention::default(),
            output_dir: PathBuf::from("role-forge-out"),
            seed: 0,
            min_gain: louvain.min_gain,
            louvain_order: louvain.order,
            louvain_restarts: louvain.restarts,
            louvain_max_levels: louvain.max_levels,
            lambda_include_zeros: false,
            ga: GaThresholds::default(),
            k_min: 2,
            k_max: 15,
            kmeans_max_iter: kmeans.max_iter,
            kmeans_tol: kmeans.tol,
            kmeans_restarts: kmeans.restarts,
            labels: LabelThresholds::default(),
            overlap_min: detection.overlap_min,
            in_degree_min: detection.in_degree_min,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = PathBuf::from(value),
            "direction" => self.direction = value.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_value(key, value)?,
            "min_gain" => self.min_gain = parse_value(key, value)?,
            "louvain_order" => {
                self.louvain_order = match value {
                    "natural" => SweepOrder::Natural,
                    "shuffled" => SweepOrder::Shuffled,
                    _ => return Err(Error::Config(format!("louvain_order `{value}` is not natural|shuffled"))),
                }
            }
            "louvain_restarts" => self.louvain_restarts = parse_value(key, value)?,
            "louvain_max_levels" => {
                let levels: usize = parse_value(key, value)?;
                self.louvain_max_levels = (levels > 0).then_some(levels);
            }
            "lambda_include_zeros" => self.lambda_include_zeros = parse_value(key, value)?,
            "ga_hub_z" => self.ga.hub_z = parse_value(key, value)?,
            "ga_non_hub_cuts" => self.ga.non_hub = parse_list(key, value)?,
            "ga_hub_cuts" => self.ga.hub = parse_list(key, value)?,
            "k_min" => self.k_min = parse_value(key, value)?,
            "k_max" => self.k_max = parse_value(key, value)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse_value(key, value)?,
            "kmeans_tol" => self.kmeans_tol = parse_value(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse_value(key, value)?,
            "label_pivot" => self.labels.pivot = parse_value(key, value)?,
            "label_connector" => self.labels.connector = parse_value(key, value)?,
            "label_orphan" => self.labels.orphan = parse_value(key, value)?,
            "overlap_min" => self.overlap_min = parse_value(key, value)?,
            "in_degree_min" => self.in_degree_min = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every setting except `input` and `output_dir`, one `key = value` per
    /// line in fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let order = match self.louvain_order {
            SweepOrder::Natural => "natural",
            SweepOrder::Shuffled => "shuffled",
        };
        let entries: [(&str, String); 20] = [
            ("direction", self.direction.as_str().to_string()),
            ("seed", self.seed.to_string()),
            ("min_gain", self.min_gain.to_string()),
            ("louvain_order", order.to_string()),
            ("louvain_restarts", self.louvain_restarts.to_string()),
            ("louvain_max_levels", self.louvain_max_levels.unwrap_or(0).to_string()),
            ("lambda_include_zeros", self.lambda_include_zeros.to_string()),
            ("ga_hub_z", self.ga.hub_z.to_string()),
            ("ga_non_hub_cuts", join(&self.ga.non_hub)),
            ("ga_hub_cuts", join(&self.ga.hub)),
            ("k_min", self.k_min.to_string()),
            ("k_max", self.k_max.to_string()),
            ("kmeans_max_iter", self.kmeans_max_iter.to_string()),
            ("kmeans_tol", self.kmeans_tol.to_string()),
            ("kmeans_restarts", self.kmeans_restarts.to_string()),
            ("label_pivot", self.labels.pivot.to_string()),
            ("label_connector", self.labels.connector.to_string()),
            ("label_orphan", self.labels.orphan.to_string()),
            ("overlap_min", self.overlap_min.to_string()),
            ("in_degree_min", self.in_degree_min.to_string()),
        ];
        for (k, v) in entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Checks parameters without touching any input file.
    pub fn validate_params(&self) -> Result<()> {
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::Config(format!(
                "k range [{}, {}] must satisfy 2 <= k_min <= k_max",
                self.k_min, self.k_max
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap_min) {
            return Err(Error::Config(format!("overlap_min {} outside [0, 1]", self.overlap_min)));
        }
        if self.in_degree_min < crate::capitalists::LOW_BAND_MIN {
            return Err(Error::Config(format!(
                "in_degree_min {} is below the classification floor {}",
                self.in_degree_min,
                crate::capitalists::LOW_BAND_MIN
            )));
        }
        if !(self.min_gain >= 0.0) || !(self.kmeans_tol >= 0.0) {
            return Err(Error::Config("min_gain and kmeans_tol must be >= 0".into()));
        }
        if self.louvain_restarts == 0 || self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 {
            return Err(Error::Config("restart and iteration counts must be positive".into()));
        }
        self.ga.validate()
    }

    /// [`Self::validate_params`] plus a check that the input file exists.
    pub fn validate(&self) -> Result<()> {
        self.validate_params()?;
        if !self.input.is_file() {
            return Err(Error::Config(format!("input `{}` is not a readable file", self.input.display())));
        }
        Ok(())
    }

    /// SHA-256 over the canonical settings and the contents of `inputs`.
    pub fn hash_with_inputs(&self, inputs: &[&Path]) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        for path in inputs {
            h.update(b"input_sha256 = ");
            h.update(sha256_file(path)?.as_bytes());
            h.update(b"\n");
        }
        Ok(hex(&h.finalize()))
    }

    pub fn louvain(&self) -> LouvainConfig {
        LouvainConfig {
            min_gain: self.min_gain,
            seed: self.seed,
            order: self.louvain_order,
            max_levels: self.louvain_max_levels,
            restarts: self.louvain_restarts,
        }
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            seed: self.seed,
            max_iter: self.kmeans_max_iter,
            tol: self.kmeans_tol,
            restarts: self.kmeans_restarts,
        }
    }

    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig {
            overlap_min: self.overlap_min,
            in_degree_min: self.in_degree_min,
        }
    }

    pub fn profile_options(&self) -> ProfileOptions {
        ProfileOptions {
            lambda_include_zeros: self.lambda_include_zeros,
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let read = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            break;
        }
        h.update(&buf[..read]);
    }
    Ok(hex(&h.finalize()))
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    info!("stage {name}");
    f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Guimerà–Amaral view of each node: z of total internal degree within its
/// community, participation coefficient and role.
#[derive(Debug, Clone, PartialEq)]
pub struct GaTable {
    pub z: Vec<f64>,
    pub participation: Vec<f64>,
    pub roles: Vec<GaRole>,
}

/// Role measures, embeddedness, participation and GA roles of `loaded`
/// under `p`.
pub fn compute_measures(
    loaded: &LoadedGraph,
    p: &Partition,
    opts: ProfileOptions,
    ga: &GaThresholds,
) -> Result<(MeasuresTable, GaTable)> {
    let g = &loaded.graph;
    let profiles = community_profile(g, p, opts)?;
    let matrix = measures_from_profiles(&profiles, p)?;
    let summaries = node_summaries(g, p)?;
    let internal: Vec<f64> = profiles
        .iter()
        .map(|pr| (pr.outgoing.k_int + pr.incoming.k_int) as f64)
        .collect();
    let z = z_score_within_community(&internal, p)?;
    let participation: Vec<f64> = summaries.iter().map(|s| s.1).collect();
    let roles = z
        .iter()
        .zip(&participation)
        .map(|(&z, &pc)| ga_role(z, pc, ga))
        .collect::<Result<_>>()?;
    let table = MeasuresTable {
        ids: (0..g.n()).map(|u| loaded.ids.original(u)).collect(),
        community: p.assignment().to_vec(),
        matrix,
        embeddedness: summaries.iter().map(|s| s.0).collect(),
        participation: participation.clone(),
    };
    Ok((
        table,
        GaTable {
            z,
            participation,
            roles,
        },
    ))
}

/// Outcome of standardising and clustering a measure matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    /// Groups renumbered by descending size.
    pub result: ClusteringResult,
    pub scores: Vec<KScore>,
    /// Per-group means in measure space, labelled.
    pub groups: Vec<GroupSummary>,
}

/// Standardises `matrix`, selects k in `[k_min, min(k_max, n)]` by
/// Davies–Bouldin and summarises the groups on the unstandardised values.
pub fn cluster_measures(matrix: &Matrix, cfg: &PipelineConfig) -> Result<ClusterOutcome> {
    let n = matrix.rows();
    if cfg.k_min > n {
        return Err(Error::Config(format!("k_min {} exceeds the {n} nodes", cfg.k_min)));
    }
    let k_max = cfg.k_max.min(n);
    if k_max < cfg.k_max {
        warn!("k_max lowered from {} to the node count {n}", cfg.k_max);
    }
    let std = standardize(matrix);
    let selection = select_k(&std, cfg.k_min..=k_max, &cfg.kmeans())?;
    let result = selection.best.renumbered_by_size();
    let groups = report::summarize_groups(matrix, &result.assign, result.k, &cfg.labels)?;
    Ok(ClusterOutcome {
        result,
        scores: selection.scores,
        groups,
    })
}

pub type AnovaRows = Vec<(Measure, Result<AnovaResult>)>;
pub type PairwiseRows = Vec<(Measure, PairwiseTests)>;

/// ANOVA and pairwise tests of every measure column across `groups`. A
/// failing measure is logged and kept as an error row.
pub fn group_statistics(matrix: &Matrix, groups: &[usize]) -> (AnovaRows, PairwiseRows) {
    let mut anova = Vec::new();
    let mut pairwise = Vec::new();
    for m in Measure::ALL {
        let values = matrix.column(m.column());
        let res = one_way_anova(&values, groups);
        if let Err(e) = &res {
            warn!("ANOVA on {} skipped: {e}", m.name());
        }
        anova.push((m, res));
        match pairwise_t_bonferroni(&values, groups) {
            Ok(t) => pairwise.push((m, t)),
            Err(e) => warn!("pairwise tests on {} skipped: {e}", m.name()),
        }
    }
    (anova, pairwise)
}

/// Capitalist rows with their groups, for reporting.
pub fn capitalist_rows(records: &[CapitalistRecord], loaded: &LoadedGraph, groups: Option<&[usize]>) -> Vec<CapitalistRow> {
    records
        .iter()
        .map(|r| CapitalistRow::new(r, &loaded.ids, groups.map(|g| g[r.node])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub config_hash: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    fn build(dir: &Path, config_hash: String, names: &[&str]) -> Result<Self> {
        let mut names = names.to_vec();
        names.sort_unstable();
        let entries = names
            .into_iter()
            .map(|name| {
                let path = dir.join(name);
                let bytes = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
                Ok(ManifestEntry {
                    file: name.to_string(),
                    sha256: sha256_file(&path)?,
                    bytes,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { config_hash, entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        report::write_file(path, |w| {
            use std::io::Write;
            writeln!(w, "{}", report::header_line(&self.config_hash))?;
            writeln!(w, "file\tsha256\tbytes")?;
            for e in &self.entries {
                writeln!(w, "{}\t{}\t{}", e.file, e.sha256, e.bytes)?;
            }
            Ok(())
        })
    }
}

/// Everything a run computed, besides the files it wrote.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub manifest: Manifest,
    pub loaded: LoadedGraph,
    pub partition: Partition,
    pub trace: LouvainTrace,
    pub measures: MeasuresTable,
    pub clusters: ClusterOutcome,
    pub capitalists: Vec<CapitalistRecord>,
}

/// Runs every stage and writes the artifacts and `manifest.tsv` into
/// `cfg.output_dir`. A failing stage aborts with its name; artifacts of the
/// stages before it are left in place.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hash = cfg.hash_with_inputs(&[&cfg.input])?;
    let header = report::header_line(&hash);
    let h = Some(header.as_str());
    let out = |name: &str| dir.join(name);

    let loaded = stage("ingest", || {
        let loaded = load_edge_list(&cfg.input, cfg.direction)?;
        info!("{} nodes, {} arcs", loaded.graph.n(), loaded.graph.m());
        report::write_id_map(&out(files::ID_MAP), &loaded.ids, h)?;
        Ok(loaded)
    })?;
    let g: &DirectedGraph = &loaded.graph;

    let (partition, trace) = stage("communities", || {
        let (p, trace) = louvain_directed(g, &cfg.louvain())?;
        info!("{} communities, Q = {:?}", p.n_comms(), trace.modularity.last());
        save_partition(&out(files::PARTITION), &p, &loaded.ids, h)?;
        report::write_louvain_trace(&out(files::LOUVAIN_TRACE), &trace, h)?;
        Ok((p, trace))
    })?;

    let measures = stage("measures", || {
        let (table, ga) = compute_measures(&loaded, &partition, cfg.profile_options(), &cfg.ga)?;
        report::write_measures(&out(files::MEASURES), &table, h)?;
        report::write_ga_roles(&out(files::GA_ROLES), &loaded.ids, &ga.z, &ga.participation, &ga.roles, h)?;
        Ok(table)
    })?;

    let clusters = stage("cluster", || {
        let outcome = cluster_measures(&measures.matrix, cfg)?;
        info!("selected k = {}", outcome.result.k);
        report::write_clusters(&out(files::CLUSTERS), &measures.ids, &outcome.result.assign, h)?;
        report::write_k_selection(&out(files::K_SELECTION), &outcome.scores, outcome.result.k, h)?;
        report::write_summary(&out(files::SUMMARY), &outcome.groups, h)?;
        Ok(outcome)
    })?;
    let groups = &clusters.result.assign;

    let capitalists = stage("capitalists", || {
        let records = detect_capitalists(g, &cfg.detection())?;
        info!("{} capitalists", records.len());
        let rows = capitalist_rows(&records, &loaded, Some(groups));
        report::write_capitalists(&out(files::CAPITALISTS), &rows, h)?;
        let table = crate::capitalists::crosstab(&records, groups, clusters.result.k)?;
        report::write_crosstab(&out(files::CROSSTAB), &table, h)?;
        Ok(records)
    })?;

    stage("stats", || {
        let (anova, pairwise) = group_statistics(&measures.matrix, groups);
        report::write_anova(&out(files::ANOVA), &anova, h)?;
        report::write_pairwise(&out(files::PAIRWISE), &pairwise, h)
    })?;

    stage("report", || {
        let data = ReportData {
            groups: clusters.groups.clone(),
            capitalists: capitalist_rows(&capitalists, &loaded, Some(groups)),
            preamble: vec![header.clone(), format!("# overlap_min={}", cfg.overlap_min)],
        };
        let text = report::render_report(&data)?;
        report::write_file(&out(files::REPORT), |w| std::io::Write::write_all(w, text.as_bytes()))
    })?;

    let manifest = stage("manifest", || {
        let manifest = Manifest::build(
            dir,
            hash.clone(),
            &[
                files::ID_MAP,
                files::PARTITION,
                files::LOUVAIN_TRACE,
                files::MEASURES,
                files::GA_ROLES,
                files::CLUSTERS,
                files::K_SELECTION,
                files::SUMMARY,
                files::CAPITALISTS,
                files::CROSSTAB,
                files::ANOVA,
                files::PAIRWISE,
                files::REPORT,
            ],
        )?;
        manifest.write(&out(files::MANIFEST))?;
        Ok(manifest)
    })?;

    Ok(PipelineRun {
        manifest,
        loaded,
        partition,
        trace,
        measures,
        clusters,
        capitalists,
    })
}
