//! Drops refusals and degenerate generations before analysis.
//!
//! A policy file has a `min_length: N` header line followed by one literal
//! prefix per line. Blank lines are ignored; no other trimming is applied, so
//! prefixes may contain any characters.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::TextRecord;

const BUILTIN_POLICY: &str = include_str!("../data/refusal_prefixes.txt");
const HEADER: &str = "min_length:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefusalPolicy {
    /// Texts shorter than this many characters are dropped.
    pub min_length: usize,
    pub refusal_prefixes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("policy must start with a `min_length: N` line")]
    MissingHeader,
    #[error("invalid min_length {0:?}")]
    BadMinLength(String),
    #[error("policy lists no refusal prefixes")]
    NoPrefixes,
}

impl Default for RefusalPolicy {
    fn default() -> Self {
        RefusalPolicy::parse(BUILTIN_POLICY).expect("bundled policy parses")
    }
}

impl RefusalPolicy {
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let mut lines = text
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(PolicyError::MissingHeader)?;
        let value = header
            .strip_prefix(HEADER)
            .ok_or(PolicyError::MissingHeader)?
            .trim();
        let min_length = value
            .parse()
            .map_err(|_| PolicyError::BadMinLength(value.to_string()))?;
        let refusal_prefixes: Vec<String> = lines.map(str::to_string).collect();
        if refusal_prefixes.is_empty() {
            return Err(PolicyError::NoPrefixes);
        }
        Ok(RefusalPolicy {
            min_length,
            refusal_prefixes,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The policy in file form; `parse(to_file_string())` round-trips.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("{HEADER} {}\n", self.min_length);
        for p in &self.refusal_prefixes {
            out.push_str(p);
            out.push('\n');
        }
        out
    }
}

/// Why a record was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DropReason {
    TooShort { length: usize, min_length: usize },
    RefusalPrefix { prefix: String },
    ApiRefused,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::TooShort { length, min_length } => {
                write!(f, "{length} characters, shorter than {min_length}")
            }
            DropReason::RefusalPrefix { prefix } => write!(f, "starts with refusal prefix {prefix:?}"),
            DropReason::ApiRefused => f.write_str("provider refused to generate"),
        }
    }
}

/// Returns the first rule that flags `text`, checking length before prefixes.
/// Leading whitespace is ignored for prefix matching only.
pub fn is_refusal(text: &str, policy: &RefusalPolicy) -> Option<DropReason> {
    let length = text.chars().count();
    if length < policy.min_length {
        return Some(DropReason::TooShort {
            length,
            min_length: policy.min_length,
        });
    }
    let body = text.trim_start();
    policy
        .refusal_prefixes
        .iter()
        .find(|p| body.starts_with(p.as_str()))
        .map(|p| DropReason::RefusalPrefix { prefix: p.clone() })
}

/// Checks a record against the policy, including provider-side refusals.
pub fn check_record(record: &TextRecord, policy: &RefusalPolicy) -> Option<DropReason> {
    if record.api_refused {
        return Some(DropReason::ApiRefused);
    }
    is_refusal(&record.text, policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRecord {
    #[serde(flatten)]
    pub record: TextRecord,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<TextRecord>,
    pub dropped: Vec<DroppedRecord>,
}

/// Order-preserving partition into kept and dropped records.
pub fn filter_records(
    records: impl IntoIterator<Item = TextRecord>,
    policy: &RefusalPolicy,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for record in records {
        match check_record(&record, policy) {
            Some(reason) => out.dropped.push(DroppedRecord { record, reason }),
            None => out.kept.push(record),
        }
    }
    out
}
