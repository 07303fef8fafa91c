use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use verbatim_core::manifest::{file_digest, RunManifest};
use verbatim_core::records::{read_all, AnalyzedRecord, ReadMode};
use verbatim_core::report::{build_report, emit_report, Balancing, GroupKey, ReportOptions};

use crate::{input, CmdResult, EXIT_OK};

#[derive(Clone, Copy, ValueEnum)]
enum BalancingArg {
    TasksThenTypes,
    TypesOnly,
    Unbalanced,
}

impl From<BalancingArg> for Balancing {
    fn from(b: BalancingArg) -> Self {
        match b {
            BalancingArg::TasksThenTypes => Balancing::TasksThenTypes,
            BalancingArg::TypesOnly => Balancing::TypesOnly,
            BalancingArg::Unbalanced => Balancing::Unbalanced,
        }
    }
}

#[derive(Args)]
pub struct ReportArgs {
    /// Analyzed records, as written by `analyze`.
    #[arg(long)]
    records: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated grouping keys: model, text_type, task, condition.
    #[arg(long, value_delimiter = ',', default_value = "model")]
    group_by: Vec<GroupKey>,
    #[arg(long, value_enum, default_value = "tasks-then-types")]
    balancing: BalancingArg,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// Comma-separated minimum reproduction lengths for the length curve.
    #[arg(long, value_delimiter = ',')]
    length_grid: Option<Vec<usize>>,
    /// Comma-separated minimum overlap rates for the rate curve.
    #[arg(long, value_delimiter = ',')]
    rate_grid: Option<Vec<f64>>,
}

pub fn run(args: ReportArgs) -> CmdResult {
    let mut options = ReportOptions {
        group_by: args.group_by,
        balancing: args.balancing.into(),
        top_k: args.top_k,
        ..ReportOptions::default()
    };
    if let Some(g) = args.length_grid {
        options.length_grid = g;
    }
    if let Some(g) = args.rate_grid {
        if g.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(input(anyhow!("rate grid values must lie in [0, 1]")));
        }
        options.rate_grid = g;
    }

    let outcome = read_all::<AnalyzedRecord>(&args.records, ReadMode::Strict)
        .with_context(|| format!("cannot read analyzed records {}", args.records.display()))
        .map_err(input)?;
    let records = outcome.records;
    let digests: BTreeSet<&str> = records.iter().map(|r| r.config_digest.as_str()).collect();
    if digests.len() > 1 {
        log::warn!("records come from {} different analysis configurations", digests.len());
    }

    let report = build_report(&records, &options);
    let written = emit_report(&report, &args.out)
        .with_context(|| format!("cannot write report to {}", args.out.display()))
        .map_err(input)?;

    let mut manifest = RunManifest::new("report");
    manifest.config = serde_json::to_value(&options).expect("options serialize");
    manifest.input("records", &args.records, file_digest(&args.records).map_err(input)?);
    manifest
        .output("records", records.len())
        .output("groups", report.groups.len())
        .output("analysis_config_digests", &digests)
        .output(
            "files",
            written
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect::<Vec<_>>(),
        );
    manifest.write(&args.out.join("manifest.json")).map_err(input)?;
    log::info!("{} groups written to {}", report.groups.len(), args.out.display());
    Ok(EXIT_OK)
}
