//! Aggregate statistics over analyzed records and their on-disk form.
//!
//! Output files, all written into one directory:
//!
//! * `summary.csv`: one row per group with counts, means and medians.
//! * `curves.json`: length and rate tail curves per group.
//! * `snippets.json`: the longest reproduced snippets per group.

mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::records::AnalyzedRecord;

pub use stats::{
    balanced_mean, balanced_means, default_rate_grid, mean, median, tail_curves, BalancedMeans,
    Balancing, LengthPoint, Observation, RatePoint, TailCurves, DEFAULT_LENGTH_GRID,
};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVES_FILE: &str = "curves.json";
pub const SNIPPETS_FILE: &str = "snippets.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Model,
    TextType,
    Task,
    Condition,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Model => "model",
            GroupKey::TextType => "text_type",
            GroupKey::Task => "task",
            GroupKey::Condition => "condition",
        }
    }

    fn value(self, o: &Observation) -> String {
        match self {
            GroupKey::Model => o.source.clone(),
            GroupKey::TextType => o.text_type.to_string(),
            GroupKey::Task => o.task.clone(),
            GroupKey::Condition => o.condition.clone(),
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" | "source" => Ok(GroupKey::Model),
            "text_type" => Ok(GroupKey::TextType),
            "task" => Ok(GroupKey::Task),
            "condition" => Ok(GroupKey::Condition),
            other => Err(format!(
                "unknown group key {other:?} (expected model, text_type, task or condition)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub group_by: Vec<GroupKey>,
    pub balancing: Balancing,
    pub length_grid: Vec<usize>,
    pub rate_grid: Vec<f64>,
    /// Snippets kept per group.
    pub top_k: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            group_by: vec![GroupKey::Model],
            balancing: Balancing::default(),
            length_grid: DEFAULT_LENGTH_GRID.to_vec(),
            rate_grid: default_rate_grid(),
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetDigest {
    pub record_id: String,
    pub start: usize,
    pub length: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Values of the grouping keys, in `group_by` order.
    pub key: Vec<String>,
    pub records: usize,
    pub mean_overlap_rate: f64,
    pub balanced_overlap_rate: f64,
    pub median_overlap_rate: f64,
    pub mean_max_reproduction_len: f64,
    pub median_max_reproduction_len: f64,
    pub curves: TailCurves,
    pub top_snippets: Vec<SnippetDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub options: ReportOptions,
    pub groups: Vec<GroupSummary>,
}

/// Groups records by the configured keys (sorted by key values) and
/// summarizes each group.
pub fn build_report(records: &[AnalyzedRecord], options: &ReportOptions) -> AggregateReport {
    let mut groups: BTreeMap<Vec<String>, Vec<&AnalyzedRecord>> = BTreeMap::new();
    for r in records {
        let o = Observation::from(r);
        let key = options.group_by.iter().map(|k| k.value(&o)).collect();
        groups.entry(key).or_default().push(r);
    }
    let groups = groups
        .into_iter()
        .filter_map(|(key, members)| summarize(key, &members, options))
        .collect();
    AggregateReport {
        options: options.clone(),
        groups,
    }
}

fn summarize(key: Vec<String>, members: &[&AnalyzedRecord], options: &ReportOptions) -> Option<GroupSummary> {
    let obs: Vec<Observation> = members.iter().map(|&r| Observation::from(r)).collect();
    let rates: Vec<f64> = obs.iter().map(|o| o.overlap_rate).collect();
    let lens: Vec<f64> = obs.iter().map(|o| o.max_reproduction_len as f64).collect();
    let balanced = balanced_mean(&obs, options.balancing)?;

    let mut snippets: Vec<SnippetDigest> = members
        .iter()
        .flat_map(|r| {
            r.snippets.iter().map(|s| SnippetDigest {
                record_id: r.record.record_id.clone(),
                start: s.start,
                length: s.length,
                text: s.text.clone(),
            })
        })
        .collect();
    snippets.sort_by(|a, b| {
        b.length
            .cmp(&a.length)
            .then_with(|| a.record_id.cmp(&b.record_id))
            .then(a.start.cmp(&b.start))
    });
    snippets.truncate(options.top_k);

    Some(GroupSummary {
        key,
        records: obs.len(),
        mean_overlap_rate: mean(rates.iter().copied())?,
        balanced_overlap_rate: balanced,
        median_overlap_rate: median(&rates)?,
        mean_max_reproduction_len: mean(lens.iter().copied())?,
        median_max_reproduction_len: median(&lens)?,
        curves: tail_curves(&obs, &options.length_grid, &options.rate_grid),
        top_snippets: snippets,
    })
}

#[derive(Serialize)]
struct CurvesFile<'a> {
    group_by: Vec<&'static str>,
    balancing: Balancing,
    length_grid: &'a [usize],
    rate_grid: &'a [f64],
    groups: Vec<CurvesEntry<'a>>,
}

#[derive(Serialize)]
struct CurvesEntry<'a> {
    key: &'a [String],
    records: usize,
    length_curve: &'a [LengthPoint],
    rate_curve: &'a [RatePoint],
}

#[derive(Serialize)]
struct SnippetsFile<'a> {
    group_by: Vec<&'static str>,
    top_k: usize,
    groups: Vec<SnippetsEntry<'a>>,
}

#[derive(Serialize)]
struct SnippetsEntry<'a> {
    key: &'a [String],
    snippets: &'a [SnippetDigest],
}

fn decimal(x: f64) -> String {
    format!("{x:.6}")
}

fn io_err(e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> std::io::Error {
    std::io::Error::other(e)
}

/// Writes the summary table, curves and snippet digest into `dir`, creating
/// it if needed. Returns the written paths.
pub fn emit_report(report: &AggregateReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let names: Vec<&'static str> = report.options.group_by.iter().map(|k| k.name()).collect();

    let summary = dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&summary).map_err(io_err)?;
    let mut header: Vec<&str> = names.clone();
    header.extend([
        "records",
        "mean_overlap_rate",
        "balanced_overlap_rate",
        "median_overlap_rate",
        "mean_max_reproduction_len",
        "median_max_reproduction_len",
    ]);
    w.write_record(&header).map_err(io_err)?;
    for g in &report.groups {
        let mut row = g.key.clone();
        row.push(g.records.to_string());
        row.extend(
            [
                g.mean_overlap_rate,
                g.balanced_overlap_rate,
                g.median_overlap_rate,
                g.mean_max_reproduction_len,
                g.median_max_reproduction_len,
            ]
            .map(decimal),
        );
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush()?;

    let curves = dir.join(CURVES_FILE);
    let file = CurvesFile {
        group_by: names.clone(),
        balancing: report.options.balancing,
        length_grid: &report.options.length_grid,
        rate_grid: &report.options.rate_grid,
        groups: report
            .groups
            .iter()
            .map(|g| CurvesEntry {
                key: &g.key,
                records: g.records,
                length_curve: &g.curves.length_curve,
                rate_curve: &g.curves.rate_curve,
            })
            .collect(),
    };
    write_json(&curves, &file)?;

    let snippets = dir.join(SNIPPETS_FILE);
    let file = SnippetsFile {
        group_by: names,
        top_k: report.options.top_k,
        groups: report
            .groups
            .iter()
            .map(|g| SnippetsEntry {
                key: &g.key,
                snippets: &g.top_snippets,
            })
            .collect(),
    };
    write_json(&snippets, &file)?;

    Ok(vec![summary, curves, snippets])
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io_err)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)
}
