use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde_json::json;
use verbatim_core::analysis::analyze_record;
use verbatim_core::corpus::{CorpusIndex, IndexSet, MatchSource};
use verbatim_core::hygiene::{filter_records, RefusalPolicy};
use verbatim_core::manifest::{file_digest, RunManifest};
use verbatim_core::metrics::{DEFAULT_THRESHOLD, DEFAULT_WINDOW_LEN};
use verbatim_core::records::{
    read_all, AnalysisConfig, AnalyzedRecord, ErrorEntry, JsonlWriter, ReadMode, RecordError, TextRecord,
};

use crate::{input, CmdResult, EXIT_NOTHING_ANALYZED, EXIT_OK, EXIT_RECORD_ERRORS};

pub const ANALYZED_FILE: &str = "analyzed.jsonl";
pub const DROPPED_FILE: &str = "dropped.jsonl";
pub const ERRORS_FILE: &str = "errors.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Records analyzed between progress reports and partial-file flushes.
const CHUNK: usize = 256;

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Index file; repeat to combine several shards or corpora.
    #[arg(long = "index", required = true)]
    indexes: Vec<PathBuf>,
    #[arg(long)]
    records: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD, value_parser = positive)]
    threshold: usize,
    /// Refusal policy file; the bundled policy is used when absent.
    #[arg(long)]
    refusal_policy: Option<PathBuf>,
    /// Seed for fixed-window sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN, value_parser = positive)]
    window_len: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Abort on the first malformed record instead of logging it.
    #[arg(long)]
    strict: bool,
}

pub fn run(args: AnalyzeArgs) -> CmdResult {
    let mut members = Vec::with_capacity(args.indexes.len());
    for path in &args.indexes {
        let ix = CorpusIndex::load(path)
            .with_context(|| format!("cannot load index {}", path.display()))
            .map_err(input)?;
        members.push(ix);
    }
    let index = IndexSet::new(members).context("incompatible indexes").map_err(input)?;

    let refusal_policy = match &args.refusal_policy {
        Some(p) => RefusalPolicy::load(p)
            .with_context(|| format!("cannot load refusal policy {}", p.display()))
            .map_err(input)?,
        None => RefusalPolicy::default(),
    };
    let config = AnalysisConfig {
        threshold: args.threshold,
        normalization: index.normalization(),
        window_len: args.window_len,
        seed: args.seed,
        refusal_policy_path: args.refusal_policy.as_ref().map(|p| p.display().to_string()),
        refusal_policy,
        index_paths: args.indexes.iter().map(|p| p.display().to_string()).collect(),
        index_digest: hex_digest(index.corpus_digest()),
    };
    config.validate().map_err(|m| input(anyhow::anyhow!(m)))?;
    let digest = config.digest();

    let mode = if args.strict { ReadMode::Strict } else { ReadMode::Lenient };
    let outcome = read_all::<TextRecord>(&args.records, mode)
        .with_context(|| format!("cannot read records {}", args.records.display()))
        .map_err(input)?;
    let errors: Vec<ErrorEntry> = outcome.errors.iter().map(RecordError::entry).collect();
    for e in &errors {
        log::warn!("line {}: {}", e.line.unwrap_or(0), e.message);
    }
    let total = outcome.records.len();
    let filtered = filter_records(outcome.records, &config.refusal_policy);
    log::info!(
        "{} records read, {} dropped by the refusal filter, {} malformed",
        total,
        filtered.dropped.len(),
        errors.len()
    );

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(input)?;
    let analyzed_path = args.out.join(ANALYZED_FILE);
    let partial_path = args.out.join(format!("{ANALYZED_FILE}.partial"));
    let mut done = previous_results(&[&analyzed_path, &partial_path], &digest);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .context("cannot start worker pool")
        .map_err(input)?;
    let write_err = |e: std::io::Error| input(anyhow::Error::from(e).context("cannot write output"));
    let mut writer = JsonlWriter::create(&partial_path).map_err(write_err)?;
    let mut reused = 0;
    for (i, chunk) in filtered.kept.chunks(CHUNK).enumerate() {
        let results: Vec<AnalyzedRecord> = pool.install(|| {
            chunk
                .par_iter()
                .map(|r| match done.get(&r.record_id) {
                    Some(prev) if prev.record == *r => prev.clone(),
                    _ => analyze_record(&index, r, &config, &digest),
                })
                .collect()
        });
        for (r, a) in chunk.iter().zip(&results) {
            if done.remove(&r.record_id).is_some_and(|prev| prev == *a) {
                reused += 1;
            }
        }
        writer.write_all(&results).map_err(write_err)?;
        writer.flush().map_err(write_err)?;
        log::info!("analyzed {}/{}", (i * CHUNK + chunk.len()), filtered.kept.len());
    }
    writer.finish().map_err(write_err)?;
    std::fs::rename(&partial_path, &analyzed_path).map_err(write_err)?;
    if reused > 0 {
        log::info!("{reused} records reused from a previous run");
    }

    let mut w = JsonlWriter::create(&args.out.join(DROPPED_FILE)).map_err(write_err)?;
    w.write_all(&filtered.dropped).map_err(write_err)?;
    w.finish().map_err(write_err)?;
    let mut w = JsonlWriter::create(&args.out.join(ERRORS_FILE)).map_err(write_err)?;
    w.write_all(&errors).map_err(write_err)?;
    w.finish().map_err(write_err)?;

    let mut manifest = RunManifest::new("analyze");
    manifest.config_digest = Some(digest.clone());
    manifest.config = serde_json::to_value(&config).expect("config serializes");
    for (path, member) in args.indexes.iter().zip(index.members()) {
        manifest.input("index", path, member.digest_hex());
    }
    let records_digest = file_digest(&args.records).map_err(input)?;
    manifest.input("records", &args.records, records_digest);
    manifest.output(
        "counts",
        json!({
            "records": total,
            "analyzed": filtered.kept.len(),
            "dropped": filtered.dropped.len(),
            "errors": errors.len(),
        }),
    );
    manifest.write(&args.out.join(MANIFEST_FILE)).map_err(write_err)?;

    if !errors.is_empty() {
        log::warn!("completed with {} record errors, see {}", errors.len(), ERRORS_FILE);
        return Ok(EXIT_RECORD_ERRORS);
    }
    if filtered.kept.is_empty() {
        log::warn!("nothing analyzed: every record was dropped or the input was empty");
        return Ok(EXIT_NOTHING_ANALYZED);
    }
    Ok(EXIT_OK)
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn hex_digest(bytes: [u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Results of earlier runs with the same configuration, by record_id.
/// Unreadable or truncated files contribute whatever lines still parse.
fn previous_results(paths: &[&Path], digest: &str) -> HashMap<String, AnalyzedRecord> {
    let mut out = HashMap::new();
    for path in paths {
        if !path.is_file() {
            continue;
        }
        if let Ok(prev) = read_all::<AnalyzedRecord>(path, ReadMode::Lenient) {
            for a in prev.records {
                if a.config_digest == digest {
                    out.insert(a.record.record_id.clone(), a);
                }
            }
        }
    }
    out
}
