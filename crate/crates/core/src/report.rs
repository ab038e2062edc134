//! Tab-separated artifact files and the rendered summary report.
//!
//! Every artifact may start with `#` comment lines (the generating config
//! hash among them), followed by a column header and one record per line.
//! Reals are written in shortest round-trip form so that reading an
//! artifact back reproduces the computed values exactly.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::capitalists::{crosstab_entries, Band, Behavior, CapitalistRecord, CrossTabRow};
use crate::clustering::{label_role, KScore, LabelThresholds};
use crate::error::{Error, Result};
use crate::graph::IdMap;
use crate::louvain::LouvainTrace;
use crate::measures::{GaRole, Matrix, Measure};
use crate::stats::{format_p, AnovaResult, PairwiseTests};

/// Artifact file names inside an output directory.
pub mod files {
    pub const ID_MAP: &str = "id_map.tsv";
    pub const PARTITION: &str = "partition.tsv";
    pub const LOUVAIN_TRACE: &str = "louvain_trace.tsv";
    pub const MEASURES: &str = "measures.tsv";
    pub const GA_ROLES: &str = "ga_roles.tsv";
    pub const CLUSTERS: &str = "clusters.tsv";
    pub const K_SELECTION: &str = "k_selection.tsv";
    pub const SUMMARY: &str = "summary.tsv";
    pub const CAPITALISTS: &str = "capitalists.tsv";
    pub const CROSSTAB: &str = "crosstab.tsv";
    pub const ANOVA: &str = "anova.tsv";
    pub const PAIRWISE: &str = "pairwise.tsv";
    pub const REPORT: &str = "report.txt";
    pub const MANIFEST: &str = "manifest.tsv";
}

const HASH_PREFIX: &str = "# role-forge config_hash=";

pub fn header_line(config_hash: &str) -> String {
    format!("{HASH_PREFIX}{config_hash}")
}

/// Extracts the config hash from an artifact's leading comment lines.
pub fn read_config_hash(path: &Path) -> Result<Option<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(HASH_PREFIX).map(str::to_string)))
}

/// Creates `path`, lets `body` fill it and flushes.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_header<W: Write>(w: &mut W, header: Option<&str>, columns: &[&str]) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(w, "{h}")?;
    }
    writeln!(w, "{}", columns.join("\t"))
}

/// Data rows of a TSV artifact, checked against the expected header.
struct Records {
    path: PathBuf,
    rows: Vec<(usize, Vec<String>)>,
}

impl Records {
    fn read(path: &Path, columns: &[&str]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let Some((i, header)) = lines.next() else {
            return Err(Error::parse(path, 1, "missing column header"));
        };
        if header.split('\t').ne(columns.iter().copied()) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected header `{}`", columns.join(" ")),
            ));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
            if fields.len() != columns.len() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {} fields, found {}", columns.len(), fields.len()),
                ));
            }
            rows.push((i + 1, fields));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn parse<T: FromStr>(&self, line: usize, field: &str, what: &str) -> Result<T> {
        field
            .parse()
            .map_err(|_| Error::parse(&self.path, line, format!("bad {what} `{field}`")))
    }

    fn parse_opt<T: FromStr>(&self, line: usize, field: &str, what: &str) -> Result<Option<T>> {
        if field.is_empty() {
            Ok(None)
        } else {
            self.parse(line, field, what).map(Some)
        }
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_id_map(path: &Path, ids: &IdMap, header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["dense_id", "original_id"])?;
        for u in 0..ids.len() {
            writeln!(w, "{u}\t{}", ids.original(u))?;
        }
        Ok(())
    })
}

pub fn write_louvain_trace(path: &Path, trace: &LouvainTrace, header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["level", "modularity", "communities"])?;
        for (level, (q, p)) in trace.modularity.iter().zip(&trace.levels).enumerate() {
            writeln!(w, "{level}\t{q}\t{}", p.n_comms())?;
        }
        Ok(())
    })
}

/// Per-node measure rows in original-id terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuresTable {
    pub ids: Vec<u64>,
    pub community: Vec<u32>,
    /// `n x 8`, columns in [`Measure::ALL`] order.
    pub matrix: Matrix,
    /// `None` for nodes without links.
    pub embeddedness: Vec<Option<f64>>,
    pub participation: Vec<f64>,
}

fn measures_columns() -> Vec<&'static str> {
    let mut cols = vec!["original_id", "community"];
    cols.extend(Measure::ALL.iter().map(|m| m.name()));
    cols.extend(["embeddedness", "P"]);
    cols
}

pub fn write_measures(path: &Path, t: &MeasuresTable, header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &measures_columns())?;
        for i in 0..t.ids.len() {
            write!(w, "{}\t{}", t.ids[i], t.community[i])?;
            for v in t.matrix.row(i) {
                write!(w, "\t{v}")?;
            }
            writeln!(w, "\t{}\t{}", opt(t.embeddedness[i]), t.participation[i])?;
        }
        Ok(())
    })
}

pub fn read_measures(path: &Path) -> Result<MeasuresTable> {
    let rec = Records::read(path, &measures_columns())?;
    let n = rec.rows.len();
    let mut t = MeasuresTable {
        ids: Vec::with_capacity(n),
        community: Vec::with_capacity(n),
        matrix: Matrix::zeros(n, Measure::ALL.len()),
        embeddedness: Vec::with_capacity(n),
        participation: Vec::with_capacity(n),
    };
    for (i, (line, f)) in rec.rows.iter().enumerate() {
        t.ids.push(rec.parse(*line, &f[0], "node id")?);
        t.community.push(rec.parse(*line, &f[1], "community")?);
        for (j, m) in Measure::ALL.iter().enumerate() {
            t.matrix.row_mut(i)[j] = rec.parse(*line, &f[2 + j], m.name())?;
        }
        t.embeddedness.push(rec.parse_opt(*line, &f[10], "embeddedness")?);
        t.participation.push(rec.parse(*line, &f[11], "participation")?);
    }
    Ok(t)
}

pub fn write_ga_roles(
    path: &Path,
    ids: &IdMap,
    z: &[f64],
    participation: &[f64],
    roles: &[GaRole],
    header: Option<&str>,
) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["original_id", "z", "P", "role"])?;
        for u in 0..ids.len() {
            writeln!(w, "{}\t{}\t{}\t{}", ids.original(u), z[u], participation[u], roles[u].name())?;
        }
        Ok(())
    })
}

pub fn write_clusters(path: &Path, ids: &[u64], groups: &[usize], header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["original_id", "group"])?;
        for (id, g) in ids.iter().zip(groups) {
            writeln!(w, "{id}\t{g}")?;
        }
        Ok(())
    })
}

/// `(original_id, group)` pairs in file order.
pub fn read_clusters(path: &Path) -> Result<Vec<(u64, usize)>> {
    let rec = Records::read(path, &["original_id", "group"])?;
    rec.rows
        .iter()
        .map(|(line, f)| Ok((rec.parse(*line, &f[0], "node id")?, rec.parse(*line, &f[1], "group")?)))
        .collect()
}

pub fn write_k_selection(path: &Path, scores: &[KScore], chosen: usize, header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["k", "inertia", "davies_bouldin", "selected"])?;
        for s in scores {
            let mark = if s.k == chosen { "*" } else { "" };
            writeln!(w, "{}\t{}\t{}\t{mark}", s.k, opt(s.inertia), opt(s.db_index))?;
        }
        Ok(())
    })
}

/// Size, share, role label and mean measures of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: usize,
    pub size: usize,
    /// Percentage of all nodes.
    pub proportion: f64,
    pub label: String,
    /// Mean of each measure column over the group.
    pub means: Vec<f64>,
}

/// Summarises groups `0..k` of `mat` and labels them from their means.
pub fn summarize_groups(
    mat: &Matrix,
    groups: &[usize],
    k: usize,
    thresholds: &LabelThresholds,
) -> Result<Vec<GroupSummary>> {
    if groups.len() != mat.rows() {
        return Err(Error::Domain(format!(
            "{} group labels for {} rows",
            groups.len(),
            mat.rows()
        )));
    }
    let mut sizes = vec![0usize; k];
    let mut sums = vec![vec![0.0; mat.cols()]; k];
    for (row, &g) in mat.iter_rows().zip(groups) {
        if g >= k {
            return Err(Error::Domain(format!("group {g} out of range for k={k}")));
        }
        sizes[g] += 1;
        for (s, v) in sums[g].iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = mat.rows().max(1) as f64;
    (0..k)
        .map(|g| {
            let means: Vec<f64> = sums[g].iter().map(|s| s / sizes[g].max(1) as f64).collect();
            Ok(GroupSummary {
                group: g,
                size: sizes[g],
                proportion: 100.0 * sizes[g] as f64 / n,
                label: label_role(&means, thresholds)?.to_string(),
                means,
            })
        })
        .collect()
}

fn summary_columns() -> Vec<&'static str> {
    let mut cols = vec!["group", "size", "proportion", "label"];
    cols.extend(Measure::ALL.iter().map(|m| m.name()));
    cols
}

pub fn write_summary(path: &Path, groups: &[GroupSummary], header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &summary_columns())?;
        for s in groups {
            write!(w, "{}\t{}\t{}\t{}", s.group, s.size, s.proportion, s.label)?;
            for m in &s.means {
                write!(w, "\t{m}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

pub fn read_summary(path: &Path) -> Result<Vec<GroupSummary>> {
    let rec = Records::read(path, &summary_columns())?;
    rec.rows
        .iter()
        .map(|(line, f)| {
            Ok(GroupSummary {
                group: rec.parse(*line, &f[0], "group")?,
                size: rec.parse(*line, &f[1], "size")?,
                proportion: rec.parse(*line, &f[2], "proportion")?,
                label: f[3].clone(),
                means: f[4..]
                    .iter()
                    .map(|v| rec.parse(*line, v, "mean"))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// A detected capitalist in original-id terms, with its role group when
/// known.
#[derive(Debug, Clone, PartialEq)]
pub struct CapitalistRow {
    pub id: u64,
    pub k_in: usize,
    pub k_out: usize,
    pub overlap: f64,
    pub ratio: f64,
    pub band: Band,
    pub behavior: Behavior,
    pub group: Option<usize>,
}

impl CapitalistRow {
    pub fn new(r: &CapitalistRecord, ids: &IdMap, group: Option<usize>) -> Self {
        Self {
            id: ids.original(r.node),
            k_in: r.k_in,
            k_out: r.k_out,
            overlap: r.overlap,
            ratio: r.ratio,
            band: r.band,
            behavior: r.behavior,
            group,
        }
    }
}

const CAPITALIST_COLUMNS: [&str; 8] = [
    "original_id",
    "k_in",
    "k_out",
    "overlap",
    "ratio",
    "band",
    "behavior",
    "group",
];

pub fn write_capitalists(path: &Path, rows: &[CapitalistRow], header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &CAPITALIST_COLUMNS)?;
        for r in rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.id,
                r.k_in,
                r.k_out,
                r.overlap,
                r.ratio,
                r.band,
                r.behavior,
                opt(r.group)
            )?;
        }
        Ok(())
    })
}

pub fn read_capitalists(path: &Path) -> Result<Vec<CapitalistRow>> {
    let rec = Records::read(path, &CAPITALIST_COLUMNS)?;
    rec.rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            Ok(CapitalistRow {
                id: rec.parse(line, &f[0], "node id")?,
                k_in: rec.parse(line, &f[1], "k_in")?,
                k_out: rec.parse(line, &f[2], "k_out")?,
                overlap: rec.parse(line, &f[3], "overlap")?,
                ratio: rec.parse(line, &f[4], "ratio")?,
                band: rec.parse(line, &f[5], "band")?,
                behavior: rec.parse(line, &f[6], "behavior")?,
                group: rec.parse_opt(line, &f[7], "group")?,
            })
        })
        .collect()
}

fn group_name(g: usize) -> String {
    format!("G{}", g + 1)
}

pub fn write_crosstab(path: &Path, rows: &[CrossTabRow], header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["band", "behavior", "group", "count", "pct_of_slice", "pct_of_group"])?;
        for r in rows {
            for g in 0..r.counts.len() {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{:.2}\t{:.2}",
                    r.band,
                    r.behavior,
                    group_name(g),
                    r.counts[g],
                    r.share_of_capitalists[g],
                    r.share_of_group[g]
                )?;
            }
        }
        Ok(())
    })
}

/// One ANOVA per measure; failed tests are reported with their reason.
pub fn write_anova(path: &Path, rows: &[(Measure, Result<AnovaResult>)], header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["measure", "F", "df_between", "df_within", "p", "note"])?;
        for (m, res) in rows {
            match res {
                Ok(a) => writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t",
                    m.name(),
                    a.f,
                    a.df_between,
                    a.df_within,
                    format_p(a.p)
                )?,
                Err(e) => writeln!(w, "{}\t\t\t\t\t{e}", m.name())?,
            }
        }
        Ok(())
    })
}

/// Raw and Bonferroni-adjusted pairwise p-values per measure, one line per
/// unordered group pair.
pub fn write_pairwise(path: &Path, rows: &[(Measure, PairwiseTests)], header: Option<&str>) -> Result<()> {
    write_file(path, |w| {
        write_header(w, header, &["measure", "group_a", "group_b", "p_raw", "p_adjusted"])?;
        for (m, t) in rows {
            for a in 0..t.groups.len() {
                for b in a + 1..t.groups.len() {
                    let fmt = |p: Option<f64>| p.map(format_p).unwrap_or_else(|| "skipped".into());
                    writeln!(
                        w,
                        "{}\t{}\t{}\t{}\t{}",
                        m.name(),
                        group_name(t.groups[a]),
                        group_name(t.groups[b]),
                        fmt(t.raw[a][b]),
                        fmt(t.adjusted[a][b])
                    )?;
                }
            }
        }
        Ok(())
    })
}

/// Inputs of [`render_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportData {
    pub groups: Vec<GroupSummary>,
    pub capitalists: Vec<CapitalistRow>,
    /// Comment lines copied to the top of the report.
    pub preamble: Vec<String>,
}

/// Reads the group summary and capitalist artifacts from `dir`.
pub fn load_report_data(dir: &Path) -> Result<ReportData> {
    let need = |name: &str| {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact(p.display().to_string()))
        }
    };
    let summary = need(files::SUMMARY)?;
    let capitalists = need(files::CAPITALISTS)?;
    let preamble = read_config_hash(&summary)?.map(|h| header_line(&h)).into_iter().collect();
    Ok(ReportData {
        groups: read_summary(&summary)?,
        capitalists: read_capitalists(&capitalists)?,
        preamble,
    })
}

/// Renders the group table, the per-group means and the two capitalist
/// cross-tabulations as tab-separated text blocks.
pub fn render_report(data: &ReportData) -> Result<String> {
    let k = data.groups.len();
    let sizes: Vec<usize> = data.groups.iter().map(|g| g.size).collect();
    let n: usize = sizes.iter().sum();
    let entries = data
        .capitalists
        .iter()
        .map(|c| {
            let g = c
                .group
                .ok_or_else(|| Error::MissingArtifact(format!("group of capitalist {}", c.id)))?;
            Ok((c.band, c.behavior, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = crosstab_entries(&entries, &sizes)?;
    let names: Vec<String> = (0..k).map(group_name).collect();

    let mut out = String::new();
    for line in &data.preamble {
        writeln!(out, "{line}").unwrap();
    }
    writeln!(out, "Group sizes and roles").unwrap();
    writeln!(out, "group\tsize\tproportion\trole").unwrap();
    for g in &data.groups {
        writeln!(out, "{}\t{}\t{:.2}%\t{}", group_name(g.group), g.size, g.proportion, g.label).unwrap();
    }
    writeln!(out, "total\t{n}\t{:.2}%", data.groups.iter().map(|g| g.proportion).sum::<f64>()).unwrap();

    writeln!(out, "\nMean measures per group").unwrap();
    let measure_names: Vec<&str> = Measure::ALL.iter().map(|m| m.name()).collect();
    writeln!(out, "group\t{}", measure_names.join("\t")).unwrap();
    for g in &data.groups {
        let cells: Vec<String> = g.means.iter().map(|m| format!("{m:.2}")).collect();
        writeln!(out, "{}\t{}", group_name(g.group), cells.join("\t")).unwrap();
    }

    type Cells = fn(&CrossTabRow) -> &Vec<f64>;
    let tables: [(&str, Cells); 2] = [
        ("Share of each slice's capitalists per group (%)", |r| &r.share_of_capitalists),
        ("Share of each group's nodes that are capitalists (%)", |r| &r.share_of_group),
    ];
    for (title, cells) in tables {
        writeln!(out, "\n{title}").unwrap();
        writeln!(out, "band\tbehavior\tcapitalists\t{}", names.join("\t")).unwrap();
        for r in &rows {
            let vals: Vec<String> = cells(r).iter().map(|v| format!("{v:.2}")).collect();
            writeln!(out, "{}\t{}\t{}\t{}", r.band, r.behavior, r.total(), vals.join("\t")).unwrap();
        }
    }
    Ok(out)
}
