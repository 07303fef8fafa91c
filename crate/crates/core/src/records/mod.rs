//! Record formats: generated or human-written texts in, analysis results out.
//!
//! Every file is line-delimited JSON, one record per line. Field names are
//! part of the format.

mod jsonl;
mod taxonomy;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Normalization;
use crate::hygiene::RefusalPolicy;
use crate::metrics::{ReproducedSnippet, SampledWindows, DEFAULT_THRESHOLD, DEFAULT_WINDOW_LEN};

pub use jsonl::{read_all, read_jsonl, read_records, JsonlWriter, ReadMode, ReadOutcome, RecordReader};
pub use taxonomy::{builtin_taxonomy, TaskSpec, Taxonomy, TOPIC_PLACEHOLDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextType {
    Creative,
    Expository,
    Argumentative,
}

impl TextType {
    pub const ALL: [TextType; 3] = [TextType::Creative, TextType::Expository, TextType::Argumentative];

    pub fn as_str(self) -> &'static str {
        match self {
            TextType::Creative => "creative",
            TextType::Expository => "expository",
            TextType::Argumentative => "argumentative",
        }
    }
}

impl fmt::Display for TextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// System prompt a generation was produced under. Any name other than the
/// three built-in ones is a custom condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum SystemPromptCondition {
    #[default]
    None,
    Assistant,
    Specific,
    Custom(String),
}

impl SystemPromptCondition {
    pub fn as_str(&self) -> &str {
        match self {
            SystemPromptCondition::None => "none",
            SystemPromptCondition::Assistant => "assistant",
            SystemPromptCondition::Specific => "specific",
            SystemPromptCondition::Custom(name) => name,
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "none" => SystemPromptCondition::None,
            "assistant" => SystemPromptCondition::Assistant,
            "specific" => SystemPromptCondition::Specific,
            other => SystemPromptCondition::Custom(other.to_string()),
        }
    }

    fn is_none(&self) -> bool {
        *self == SystemPromptCondition::None
    }
}

impl fmt::Display for SystemPromptCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SystemPromptCondition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SystemPromptCondition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(SystemPromptCondition::parse(&s))
    }
}

/// One text to analyze, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub record_id: String,
    /// Model name, or `"human"` for human-written baselines.
    pub source: String,
    pub task: String,
    pub text_type: TextType,
    pub prompt: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "SystemPromptCondition::is_none")]
    pub system_prompt_condition: SystemPromptCondition,
    /// The provider declined to produce a completion (content filter).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub api_refused: bool,
    /// `Some(false)` when the provider ignores the requested seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_supported: Option<bool>,
}

impl TextRecord {
    pub fn is_human(&self) -> bool {
        self.source == "human"
    }
}

/// Records that carry a unique id and can check their own invariants.
pub trait Keyed {
    fn key(&self) -> &str;

    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

impl Keyed for TextRecord {
    fn key(&self) -> &str {
        &self.record_id
    }

    fn validate(&self) -> Result<(), String> {
        if self.record_id.is_empty() {
            return Err("record_id is empty".into());
        }
        if let Some(t) = self.temperature {
            if !t.is_finite() || t < 0.0 {
                return Err(format!("temperature {t} is not a non-negative number"));
            }
        }
        if let Some(spec) = builtin_taxonomy().task(&self.task) {
            if spec.text_type != self.text_type {
                return Err(format!(
                    "task {:?} is {}, not {}",
                    self.task, spec.text_type, self.text_type
                ));
            }
        }
        Ok(())
    }
}

/// Everything that influences per-record analysis output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub threshold: usize,
    pub normalization: Normalization,
    pub window_len: usize,
    pub seed: u64,
    pub refusal_policy_path: Option<String>,
    pub refusal_policy: RefusalPolicy,
    pub index_paths: Vec<String>,
    /// Hex corpus digest of the index (or index set) analyzed against.
    pub index_digest: String,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            threshold: DEFAULT_THRESHOLD,
            normalization: Normalization::None,
            window_len: DEFAULT_WINDOW_LEN,
            seed: 0,
            refusal_policy_path: None,
            refusal_policy: RefusalPolicy::default(),
            index_paths: Vec::new(),
            index_digest: String::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.threshold < 1 {
            return Err("threshold must be at least 1".into());
        }
        if self.window_len < 1 {
            return Err("window length must be at least 1".into());
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedRecord {
    #[serde(flatten)]
    pub record: TextRecord,
    pub refused: bool,
    /// Length of the analyzed text in characters.
    pub analyzed_chars: usize,
    pub overlap_rate: f64,
    pub max_reproduction_len: usize,
    pub reproduced_chars: usize,
    pub snippets: Vec<ReproducedSnippet>,
    pub sampled_windows: SampledWindows,
    pub config_digest: String,
}

impl Keyed for AnalyzedRecord {
    fn key(&self) -> &str {
        &self.record.record_id
    }

    fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.overlap_rate) {
            return Err(format!("overlap_rate {} outside [0, 1]", self.overlap_rate));
        }
        self.record.validate()
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate record_id {record_id:?} (first seen on line {first_line})")]
    DuplicateId {
        line: usize,
        record_id: String,
        first_line: usize,
    },
    #[error("line {line}: record {record_id:?}: {message}")]
    Invalid {
        line: usize,
        record_id: String,
        message: String,
    },
}

/// Line of an errors file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub line: Option<usize>,
    pub record_id: Option<String>,
    pub message: String,
}

impl RecordError {
    pub fn line(&self) -> Option<usize> {
        match self {
            RecordError::Io { .. } => None,
            RecordError::Parse { line, .. }
            | RecordError::DuplicateId { line, .. }
            | RecordError::Invalid { line, .. } => Some(*line),
        }
    }

    pub fn entry(&self) -> ErrorEntry {
        let record_id = match self {
            RecordError::DuplicateId { record_id, .. } | RecordError::Invalid { record_id, .. } => {
                Some(record_id.clone())
            }
            _ => None,
        };
        ErrorEntry {
            line: self.line(),
            record_id,
            message: self.to_string(),
        }
    }
}
