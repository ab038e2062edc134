use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use role_forge::capitalists::{crosstab, detect_capitalists};
use role_forge::graph::load_edge_list;
use role_forge::louvain::louvain_directed;
use role_forge::partition::{load_partition, save_partition};
use role_forge::pipeline::{self, capitalist_rows, PipelineConfig};
use role_forge::report::{self, files, header_line};

#[derive(Parser)]
#[command(name = "role-forge", version, about = "Community roles and social capitalists in directed follower graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities with directed Louvain.
    Communities {
        #[arg(long)]
        input: PathBuf,
        /// Partition file to write.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        louvain: LouvainArgs,
    },
    /// Compute the eight role measures, embeddedness and participation.
    Measures {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        /// Measures TSV to write.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        measures: MeasureArgs,
    },
    /// Standardise measures, pick k by Davies–Bouldin and label the groups.
    Cluster {
        #[arg(long)]
        measures: PathBuf,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
    },
    /// Detect and classify social capitalists.
    Capitalists {
        #[arg(long)]
        input: PathBuf,
        /// Cluster assignment; adds groups and the cross-tabulation.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        capitalists: CapitalistArgs,
    },
    /// ANOVA and Bonferroni-corrected pairwise t-tests per measure.
    Stats {
        #[arg(long)]
        measures: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render the summary report from a directory of artifacts.
    Report {
        /// Directory holding summary.tsv and capitalists.tsv.
        #[arg(long)]
        dir: PathBuf,
        /// Report file; defaults to report.txt in the directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every stage and write all artifacts plus a manifest.
    Run {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        louvain: LouvainArgs,
        #[command(flatten)]
        measures: MeasureArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[command(flatten)]
        capitalists: CapitalistArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Arc convention of the edge list: src-follows-dst or dst-follows-src.
    #[arg(long)]
    direction: Option<String>,
}

#[derive(Args)]
struct LouvainArgs {
    #[arg(long)]
    min_gain: Option<f64>,
    /// natural or shuffled.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    louvain_restarts: Option<usize>,
    /// 0 runs to convergence.
    #[arg(long)]
    max_levels: Option<usize>,
}

#[derive(Args)]
struct MeasureArgs {
    /// Include unconnected external communities (as zeros) in lambda.
    #[arg(long)]
    lambda_include_zeros: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    kmeans_restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct CapitalistArgs {
    #[arg(long)]
    overlap_min: Option<f64>,
    #[arg(long)]
    in_degree_min: Option<usize>,
}

fn set<T: ToString>(cfg: &mut PipelineConfig, key: &str, value: &Option<T>) -> Result<()> {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

impl CommonArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        set(&mut cfg, "seed", &self.seed)?;
        set(&mut cfg, "direction", &self.direction)?;
        Ok(cfg)
    }
}

impl LouvainArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        set(cfg, "min_gain", &self.min_gain)?;
        set(cfg, "louvain_order", &self.order)?;
        set(cfg, "louvain_restarts", &self.louvain_restarts)?;
        set(cfg, "louvain_max_levels", &self.max_levels)
    }
}

impl MeasureArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.lambda_include_zeros {
            cfg.lambda_include_zeros = true;
        }
    }
}

impl ClusterArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        set(cfg, "k_min", &self.k_min)?;
        set(cfg, "k_max", &self.k_max)?;
        set(cfg, "kmeans_restarts", &self.kmeans_restarts)?;
        set(cfg, "kmeans_max_iter", &self.max_iter)
    }
}

impl CapitalistArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        set(cfg, "overlap_min", &self.overlap_min)?;
        set(cfg, "in_degree_min", &self.in_degree_min)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Group of each node of `ids`, looked up by original id.
fn groups_by_id(path: &Path, ids: impl Iterator<Item = u64>) -> Result<Vec<usize>> {
    let table: HashMap<u64, usize> = report::read_clusters(path)?.into_iter().collect();
    ids.map(|id| {
        table
            .get(&id)
            .copied()
            .with_context(|| format!("node {id} has no group in {}", path.display()))
    })
    .collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Communities {
            input,
            output,
            common,
            louvain,
        } => {
            let mut cfg = common.config()?;
            louvain.apply(&mut cfg)?;
            cfg.validate_params()?;
            let header = header_line(&cfg.hash_with_inputs(&[&input])?);
            let loaded = load_edge_list(&input, cfg.direction)?;
            let (p, trace) = louvain_directed(&loaded.graph, &cfg.louvain())?;
            info!("{} communities, Q = {:?}", p.n_comms(), trace.modularity.last());
            save_partition(&output, &p, &loaded.ids, Some(&header))?;
        }
        Command::Measures {
            input,
            partition,
            output,
            common,
            measures,
        } => {
            let mut cfg = common.config()?;
            measures.apply(&mut cfg);
            cfg.validate_params()?;
            let header = header_line(&cfg.hash_with_inputs(&[&input, &partition])?);
            let loaded = load_edge_list(&input, cfg.direction)?;
            let p = load_partition(&partition, &loaded.ids)?;
            let (table, _) = pipeline::compute_measures(&loaded, &p, cfg.profile_options(), &cfg.ga)?;
            report::write_measures(&output, &table, Some(&header))?;
        }
        Command::Cluster {
            measures,
            output,
            common,
            cluster,
        } => {
            let mut cfg = common.config()?;
            cluster.apply(&mut cfg)?;
            cfg.validate_params()?;
            let header = header_line(&cfg.hash_with_inputs(&[&measures])?);
            let h = Some(header.as_str());
            let table = report::read_measures(&measures)?;
            let outcome = pipeline::cluster_measures(&table.matrix, &cfg)?;
            create_dir(&output)?;
            report::write_clusters(&output.join(files::CLUSTERS), &table.ids, &outcome.result.assign, h)?;
            report::write_k_selection(&output.join(files::K_SELECTION), &outcome.scores, outcome.result.k, h)?;
            report::write_summary(&output.join(files::SUMMARY), &outcome.groups, h)?;
            info!("selected k = {}", outcome.result.k);
        }
        Command::Capitalists {
            input,
            clusters,
            output,
            common,
            capitalists,
        } => {
            let mut cfg = common.config()?;
            capitalists.apply(&mut cfg)?;
            cfg.validate_params()?;
            let mut inputs = vec![input.as_path()];
            inputs.extend(clusters.as_deref());
            let header = header_line(&cfg.hash_with_inputs(&inputs)?);
            let h = Some(header.as_str());
            let loaded = load_edge_list(&input, cfg.direction)?;
            let records = detect_capitalists(&loaded.graph, &cfg.detection())?;
            info!("{} capitalists", records.len());
            create_dir(&output)?;
            let groups = match &clusters {
                Some(path) => Some(groups_by_id(path, (0..loaded.ids.len()).map(|u| loaded.ids.original(u)))?),
                None => None,
            };
            let rows = capitalist_rows(&records, &loaded, groups.as_deref());
            report::write_capitalists(&output.join(files::CAPITALISTS), &rows, h)?;
            if let Some(groups) = &groups {
                let k = groups.iter().max().map_or(0, |g| g + 1);
                let table = crosstab(&records, groups, k)?;
                report::write_crosstab(&output.join(files::CROSSTAB), &table, h)?;
            }
        }
        Command::Stats {
            measures,
            clusters,
            output,
            common,
        } => {
            let cfg = common.config()?;
            let header = header_line(&cfg.hash_with_inputs(&[&measures, &clusters])?);
            let h = Some(header.as_str());
            let table = report::read_measures(&measures)?;
            let groups = groups_by_id(&clusters, table.ids.iter().copied())?;
            let (anova, pairwise) = pipeline::group_statistics(&table.matrix, &groups);
            create_dir(&output)?;
            report::write_anova(&output.join(files::ANOVA), &anova, h)?;
            report::write_pairwise(&output.join(files::PAIRWISE), &pairwise, h)?;
        }
        Command::Report { dir, output } => {
            let data = report::load_report_data(&dir)?;
            let text = report::render_report(&data)?;
            let path = output.unwrap_or_else(|| dir.join(files::REPORT));
            fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            print!("{text}");
        }
        Command::Run {
            input,
            output,
            common,
            louvain,
            measures,
            cluster,
            capitalists,
        } => {
            let mut cfg = common.config()?;
            if let Some(input) = input {
                cfg.input = input;
            }
            if let Some(output) = output {
                cfg.output_dir = output;
            }
            louvain.apply(&mut cfg)?;
            measures.apply(&mut cfg);
            cluster.apply(&mut cfg)?;
            capitalists.apply(&mut cfg)?;
            if cfg.input.as_os_str().is_empty() {
                bail!("no input given (use --input or `input = ...` in the config file)");
            }
            let run = pipeline::run_pipeline(&cfg)?;
            println!(
                "{} artifacts written to {} (config_hash={})",
                run.manifest.entries.len(),
                cfg.output_dir.display(),
                run.manifest.config_hash
            );
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(value) = std::env::var("ROLE_FORGE_THREADS") {
        let n: usize = value
            .parse()
            .with_context(|| format!("ROLE_FORGE_THREADS=`{value}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    init_threads()?;
    run(Cli::parse().command)
}
