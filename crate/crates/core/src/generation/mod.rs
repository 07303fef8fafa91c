//! Collects generations from a chat-completion service: one record per
//! (prompt, seed), with retries, client-side rate limiting and a bounded
//! number of requests in flight.

mod backend;
mod mitigation;
mod ratelimit;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{Keyed, SystemPromptCondition, TextRecord, TextType};

pub use backend::{BackendError, ChatBackend, ChatRequest, ChatResponse, EndpointConfig, EndpointError, HttpBackend};
pub use mitigation::{
    assistant_presets, mitigation_prompt, preset, AssistantMetadata, AssistantPreset, MitigationError,
    DEFAULT_DATE,
};
pub use ratelimit::TokenBucket;

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// A prompt to send, with the labels its records will carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub prompt_id: String,
    pub task: String,
    pub text_type: TextType,
    pub prompt: String,
}

impl Keyed for PromptSpec {
    fn key(&self) -> &str {
        &self.prompt_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff_ms: 1000,
            max_backoff_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the initial backoff.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(30);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub model: String,
    pub prompts: Vec<PromptSpec>,
    pub temperature: f64,
    pub seeds: Vec<u64>,
    pub condition: SystemPromptCondition,
    /// Resolved system prompt text; empty for none.
    pub system_prompt: String,
    pub requests_per_minute: f64,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl GenerationJob {
    pub fn new(model: impl Into<String>, prompts: Vec<PromptSpec>) -> Self {
        GenerationJob {
            model: model.into(),
            prompts,
            temperature: DEFAULT_TEMPERATURE,
            seeds: DEFAULT_SEEDS.to_vec(),
            condition: SystemPromptCondition::None,
            system_prompt: String::new(),
            requests_per_minute: 60.0,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::Invalid(m.to_string()));
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be a non-negative number");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if self.retry.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }

    fn record(&self, prompt: &PromptSpec, seed: u64, seed_supported: bool) -> TextRecord {
        TextRecord {
            record_id: format!("{}/{}/seed-{seed}", prompt.prompt_id, self.condition),
            source: self.model.clone(),
            task: prompt.task.clone(),
            text_type: prompt.text_type,
            prompt: prompt.prompt.clone(),
            text: String::new(),
            seed: Some(seed),
            temperature: Some(self.temperature),
            system_prompt_condition: self.condition.clone(),
            api_refused: false,
            seed_supported: (!seed_supported).then_some(false),
        }
    }
}

/// An item that never produced a completion. Written to the failures file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedItem {
    #[serde(flatten)]
    pub record: TextRecord,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JobOutcome {
    /// In (prompt, seed) order.
    pub records: Vec<TextRecord>,
    /// In (prompt, seed) order.
    pub failures: Vec<FailedItem>,
    pub retries: usize,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid job: {0}")]
    Invalid(String),
    #[error("aborting job, {0}")]
    Auth(String),
}

enum ItemResult {
    Done(TextRecord),
    Failed(FailedItem),
    Aborted,
}

struct Runner<'a> {
    job: &'a GenerationJob,
    backend: &'a dyn ChatBackend,
    limiter: TokenBucket,
    abort: AtomicBool,
    auth_error: Mutex<Option<String>>,
    retries: AtomicUsize,
}

impl Runner<'_> {
    fn run_item(&self, prompt: &PromptSpec, seed: u64) -> ItemResult {
        let seed_supported = self.backend.supports_seed();
        let mut record = self.job.record(prompt, seed, seed_supported);
        let request = ChatRequest {
            model: self.job.model.clone(),
            system: self.job.system_prompt.clone(),
            user: prompt.prompt.clone(),
            temperature: self.job.temperature,
            seed: seed_supported.then_some(seed),
        };
        let policy = &self.job.retry;
        let mut attempt = 0;
        loop {
            if self.abort.load(Ordering::SeqCst) {
                return ItemResult::Aborted;
            }
            attempt += 1;
            self.limiter.acquire();
            let (message, wait) = match self.backend.complete(&request) {
                Ok(response) => {
                    record.text = response.content;
                    return ItemResult::Done(record);
                }
                Err(BackendError::ContentFilter(m)) => {
                    log::info!("{}: refused by provider: {m}", record.record_id);
                    record.api_refused = true;
                    return ItemResult::Done(record);
                }
                Err(BackendError::Auth(m)) => {
                    self.abort.store(true, Ordering::SeqCst);
                    self.auth_error.lock().unwrap().get_or_insert(m);
                    return ItemResult::Aborted;
                }
                Err(e @ BackendError::Permanent(_)) => {
                    return ItemResult::Failed(FailedItem {
                        record,
                        error: e.to_string(),
                        attempts: attempt,
                    })
                }
                Err(BackendError::RateLimited { message, retry_after }) => {
                    let wait = policy.backoff(attempt).max(retry_after.unwrap_or_default());
                    (format!("rate limited: {message}"), wait)
                }
                Err(e @ BackendError::Transient(_)) => (e.to_string(), policy.backoff(attempt)),
            };
            if attempt >= policy.max_attempts {
                return ItemResult::Failed(FailedItem {
                    record,
                    error: message,
                    attempts: attempt,
                });
            }
            log::warn!("{}: attempt {attempt} failed ({message}); retrying", record.record_id);
            self.retries.fetch_add(1, Ordering::Relaxed);
            std::thread::sleep(wait);
        }
    }
}

/// Sends every (prompt, seed) pair. Results come back in (prompt, seed) order
/// regardless of completion order. An authentication failure stops the job.
pub fn run_job(job: &GenerationJob, backend: &dyn ChatBackend) -> Result<JobOutcome, GenerationError> {
    job.validate()?;
    let items: Vec<(&PromptSpec, u64)> = job
        .prompts
        .iter()
        .flat_map(|p| job.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let runner = Runner {
        job,
        backend,
        limiter: TokenBucket::new(job.requests_per_minute, job.max_in_flight),
        abort: AtomicBool::new(false),
        auth_error: Mutex::new(None),
        retries: AtomicUsize::new(0),
    };
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..job.max_in_flight.min(items.len()) {
            let tx = tx.clone();
            let (runner, next, items) = (&runner, &next, &items);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(prompt, seed)) = items.get(i) else { break };
                if tx.send((i, runner.run_item(prompt, seed))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    if let Some(message) = runner.auth_error.lock().unwrap().take() {
        return Err(GenerationError::Auth(format!("authentication failed: {message}")));
    }
    let mut results: Vec<(usize, ItemResult)> = rx.into_iter().collect();
    results.sort_by_key(|(i, _)| *i);
    let mut outcome = JobOutcome {
        retries: runner.retries.load(Ordering::Relaxed),
        ..JobOutcome::default()
    };
    for (_, r) in results {
        match r {
            ItemResult::Done(rec) => outcome.records.push(rec),
            ItemResult::Failed(f) => outcome.failures.push(f),
            ItemResult::Aborted => {}
        }
    }
    Ok(outcome)
}
