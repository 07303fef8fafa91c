use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Subcommand};
use serde_json::json;
use verbatim_core::corpus::{self, BuildOptions, CorpusError, CorpusIndex, Document, MatchSource, Normalization};
use verbatim_core::manifest::RunManifest;

use crate::{input, CmdResult, EXIT_OK, EXIT_RECORD_ERRORS};

#[derive(Subcommand)]
pub enum IndexCommand {
    /// Index a directory of text files or a JSONL file of {doc_id, content}.
    Build(BuildArgs),
    /// Check an index file's checksum, content digest and suffix order.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// NFC-normalize documents (queries are then normalized the same way).
    #[arg(long)]
    nfc: bool,
    /// Fail on the first unreadable document instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = corpus::DEFAULT_MAX_SHARD_BYTES)]
    max_shard_bytes: usize,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    index: PathBuf,
}

pub fn run(cmd: IndexCommand) -> CmdResult {
    match cmd {
        IndexCommand::Build(args) => build(args),
        IndexCommand::Verify(args) => verify(args),
    }
}

/// `<index>.manifest.json`, next to the index file.
pub fn manifest_path(index: &Path) -> PathBuf {
    let mut s = index.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn documents(path: &Path) -> Result<Box<dyn Iterator<Item = Result<Document, CorpusError>>>, CorpusError> {
    if path.is_dir() {
        Ok(Box::new(corpus::read_dir(path)?))
    } else {
        Ok(Box::new(corpus::read_jsonl(path)?))
    }
}

fn build(args: BuildArgs) -> CmdResult {
    let options = BuildOptions {
        normalization: if args.nfc { Normalization::Nfc } else { Normalization::None },
        strict: args.strict,
        max_shard_bytes: args.max_shard_bytes,
    };
    let docs = documents(&args.corpus)
        .with_context(|| format!("cannot read corpus {}", args.corpus.display()))
        .map_err(input)?;
    let (index, build_report) = CorpusIndex::build(docs, &options)
        .with_context(|| format!("cannot index {}", args.corpus.display()))
        .map_err(input)?;
    for s in &build_report.skipped {
        log::warn!("skipped document {}: {}", s.doc_id, s.reason);
    }
    index
        .save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))
        .map_err(input)?;
    log::info!(
        "indexed {} documents, {} characters, {} shards into {}",
        index.doc_count(),
        index.total_chars(),
        index.shard_count(),
        args.out.display()
    );

    let mut manifest = RunManifest::new("index build");
    manifest.config = json!({
        "normalization": options.normalization,
        "strict": options.strict,
        "max_shard_bytes": options.max_shard_bytes,
    });
    manifest.input("corpus", &args.corpus, index.digest_hex());
    manifest
        .output("index", args.out.display().to_string())
        .output("documents", index.doc_count())
        .output("total_chars", index.total_chars())
        .output("shards", index.shard_count())
        .output("skipped", &build_report.skipped);
    manifest.write(&manifest_path(&args.out)).map_err(input)?;
    Ok(if build_report.skipped.is_empty() { EXIT_OK } else { EXIT_RECORD_ERRORS })
}

fn verify(args: VerifyArgs) -> CmdResult {
    let index = CorpusIndex::load(&args.index)
        .with_context(|| format!("cannot load index {}", args.index.display()))
        .map_err(input)?;
    let stored = index.corpus_digest();
    if index.recompute_digest() != stored {
        return Err(input(anyhow!("{}: content digest mismatch", args.index.display())));
    }
    index
        .verify_suffix_order()
        .map_err(|e| input(anyhow!("{}: {e}", args.index.display())))?;
    let summary = json!({
        "index": args.index.display().to_string(),
        "corpus_digest": index.digest_hex(),
        "normalization": index.normalization(),
        "documents": index.doc_count(),
        "total_chars": index.total_chars(),
        "shards": index.shard_count(),
        "status": "ok",
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializes"));
    Ok(EXIT_OK)
}
