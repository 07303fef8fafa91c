use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use serde_json::json;
use verbatim_core::generation::{
    mitigation_prompt, preset, run_job, AssistantMetadata, EndpointConfig, GenerationError, GenerationJob,
    HttpBackend, PromptSpec, DEFAULT_DATE, DEFAULT_TEMPERATURE,
};
use verbatim_core::manifest::{file_digest, RunManifest};
use verbatim_core::records::{builtin_taxonomy, read_all, JsonlWriter, ReadMode, SystemPromptCondition};

use crate::{input, CmdResult, EXIT_OK, EXIT_RECORD_ERRORS};

#[derive(Args)]
pub struct GenerateArgs {
    /// JSONL of {prompt_id, task, text_type, prompt}.
    #[arg(long, required_unless_present = "from_taxonomy", conflicts_with = "from_taxonomy")]
    prompts: Option<PathBuf>,
    /// Use every template and example topic of the built-in task taxonomy.
    #[arg(long)]
    from_taxonomy: bool,
    #[arg(long)]
    model: String,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    base_url: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// The endpoint ignores or rejects the `seed` parameter.
    #[arg(long)]
    no_seed: bool,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    /// none, assistant, specific, or a custom label used with --system-prompt-file.
    #[arg(long, default_value = "none")]
    condition: String,
    #[arg(long)]
    system_prompt_file: Option<PathBuf>,
    /// Assistant metadata preset; defaults to the preset named like --model.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    assistant: Option<String>,
    #[arg(long)]
    company: Option<String>,
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    date: Option<String>,
    /// Requests per minute; 0 disables client-side limiting.
    #[arg(long, default_value_t = 60.0)]
    rate_limit: f64,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    #[arg(long, default_value_t = 5)]
    max_attempts: u32,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Output records file.
    #[arg(long)]
    out: PathBuf,
    /// Items that never succeeded; defaults to `<out>.failures.jsonl`.
    #[arg(long)]
    failures: Option<PathBuf>,
}

fn sibling(path: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

/// One prompt per (task, template, example topic) of the built-in taxonomy.
pub fn taxonomy_prompts() -> Vec<PromptSpec> {
    let mut out = Vec::new();
    for spec in &builtin_taxonomy().tasks {
        for t in 0..spec.templates.len() {
            for (e, topic) in spec.examples.iter().enumerate() {
                out.push(PromptSpec {
                    prompt_id: format!("{}/t{t}/e{e}", slug(&spec.task)),
                    task: spec.task.clone(),
                    text_type: spec.text_type,
                    prompt: spec.instantiate(t, topic).expect("template index in range"),
                });
            }
        }
    }
    out
}

fn system_prompt(args: &GenerateArgs, condition: &SystemPromptCondition) -> anyhow::Result<String> {
    if let SystemPromptCondition::Custom(name) = condition {
        let path = args
            .system_prompt_file
            .as_ref()
            .ok_or_else(|| anyhow!("condition {name:?} needs --system-prompt-file"))?;
        return std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()));
    }
    if args.system_prompt_file.is_some() {
        return Err(anyhow!("--system-prompt-file is only used with a custom condition"));
    }
    let mut meta = match &args.preset {
        Some(name) => AssistantMetadata::from_preset(preset(name).ok_or_else(|| anyhow!("unknown preset {name:?}"))?),
        None => preset(&args.model).map(AssistantMetadata::from_preset).unwrap_or_default(),
    };
    for (field, value) in [
        (&mut meta.assistant, &args.assistant),
        (&mut meta.company, &args.company),
        (&mut meta.cutoff, &args.cutoff),
        (&mut meta.date, &args.date),
    ] {
        if value.is_some() {
            field.clone_from(value);
        }
    }
    meta.date.get_or_insert_with(|| DEFAULT_DATE.to_string());
    Ok(mitigation_prompt(condition, &meta)?)
}

pub fn run(args: GenerateArgs) -> CmdResult {
    let prompts = match &args.prompts {
        Some(path) => read_all::<PromptSpec>(path, ReadMode::Strict)
            .with_context(|| format!("cannot read prompts {}", path.display()))
            .map_err(input)?
            .records,
        None => taxonomy_prompts(),
    };
    let condition = SystemPromptCondition::parse(&args.condition);
    let system = system_prompt(&args, &condition).map_err(input)?;

    let mut job = GenerationJob::new(args.model.clone(), prompts);
    job.temperature = args.temperature;
    job.seeds = args.seeds.clone();
    job.condition = condition;
    job.system_prompt = system;
    job.requests_per_minute = args.rate_limit;
    job.max_in_flight = args.max_in_flight;
    job.retry.max_attempts = args.max_attempts;
    job.validate().map_err(input)?;

    let backend = HttpBackend::new(EndpointConfig {
        base_url: args.base_url.clone(),
        api_key_env: args.api_key_env.clone(),
        supports_seed: !args.no_seed,
        timeout_secs: args.timeout_secs,
    })
    .map_err(input)?;
    log::info!(
        "requesting {} completions from {}",
        job.prompts.len() * job.seeds.len(),
        args.model
    );
    let outcome = match run_job(&job, &backend) {
        Ok(o) => o,
        Err(e @ GenerationError::Auth(_)) | Err(e @ GenerationError::Invalid(_)) => return Err(input(e)),
    };

    let failures_path = args.failures.clone().unwrap_or_else(|| sibling(&args.out, ".failures.jsonl"));
    let write = |path: &PathBuf, f: &dyn Fn(&mut JsonlWriter) -> std::io::Result<()>| -> Result<(), crate::Failure> {
        let mut w = JsonlWriter::create(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(input)?;
        f(&mut w).map_err(input)?;
        w.finish().map_err(input)?;
        Ok(())
    };
    write(&args.out, &|w| w.write_all(&outcome.records))?;
    write(&failures_path, &|w| w.write_all(&outcome.failures))?;

    let mut manifest = RunManifest::new("generate");
    manifest.config = json!({
        "job": job,
        "base_url": args.base_url,
        "api_key_env": args.api_key_env,
        "supports_seed": !args.no_seed,
    });
    if let Some(p) = &args.prompts {
        manifest.input("prompts", p, file_digest(p).map_err(input)?);
    }
    manifest
        .output("records", outcome.records.len())
        .output("failures", outcome.failures.len())
        .output("api_refused", outcome.records.iter().filter(|r| r.api_refused).count());
    manifest.write(&sibling(&args.out, ".manifest.json")).map_err(input)?;
    log::info!(
        "{} records, {} failures, {} retries",
        outcome.records.len(),
        outcome.failures.len(),
        outcome.retries
    );
    Ok(if outcome.failures.is_empty() { EXIT_OK } else { EXIT_RECORD_ERRORS })
}
