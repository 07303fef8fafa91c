use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::SystemPromptCondition;

const SPECIFIC: &str = include_str!("../../data/prompts/specific.txt");
const ASSISTANT: &str = include_str!("../../data/prompts/assistant.txt");
const PRESETS: &str = include_str!("../../data/assistant_presets.json");

/// Date substituted for `{date}` unless overridden.
pub const DEFAULT_DATE: &str = "September 1st, 2024";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantPreset {
    pub model: String,
    pub assistant: String,
    pub company: String,
    pub cutoff: String,
}

/// Values for the assistant prompt placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistantMetadata {
    pub assistant: Option<String>,
    pub company: Option<String>,
    pub cutoff: Option<String>,
    pub date: Option<String>,
}

impl AssistantMetadata {
    pub fn from_preset(p: &AssistantPreset) -> Self {
        AssistantMetadata {
            assistant: Some(p.assistant.clone()),
            company: Some(p.company.clone()),
            cutoff: Some(p.cutoff.clone()),
            date: Some(DEFAULT_DATE.to_string()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MitigationError {
    #[error("assistant prompt is missing values for {}", .0.join(", "))]
    MissingPlaceholders(Vec<String>),
    #[error("no built-in system prompt for condition {0:?}")]
    Unsupported(String),
}

pub fn assistant_presets() -> &'static [AssistantPreset] {
    static P: OnceLock<Vec<AssistantPreset>> = OnceLock::new();
    P.get_or_init(|| serde_json::from_str(PRESETS).expect("bundled presets parse"))
}

/// Case-insensitive lookup by model name.
pub fn preset(model: &str) -> Option<&'static AssistantPreset> {
    assistant_presets()
        .iter()
        .find(|p| p.model.eq_ignore_ascii_case(model))
}

fn template(raw: &str) -> &str {
    raw.strip_suffix('\n').unwrap_or(raw)
}

/// The system prompt for a condition; empty for `none`.
pub fn mitigation_prompt(
    condition: &SystemPromptCondition,
    meta: &AssistantMetadata,
) -> Result<String, MitigationError> {
    match condition {
        SystemPromptCondition::None => Ok(String::new()),
        SystemPromptCondition::Specific => Ok(template(SPECIFIC).to_string()),
        SystemPromptCondition::Custom(name) => Err(MitigationError::Unsupported(name.clone())),
        SystemPromptCondition::Assistant => {
            let fields = [
                ("{assistant}", &meta.assistant),
                ("{company}", &meta.company),
                ("{date}", &meta.date),
                ("{cutoff}", &meta.cutoff),
            ];
            let missing: Vec<String> = fields
                .iter()
                .filter(|(_, v)| v.as_deref().map_or(true, str::is_empty))
                .map(|(k, _)| k.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(MitigationError::MissingPlaceholders(missing));
            }
            let mut out = template(ASSISTANT).to_string();
            for (k, v) in fields {
                out = out.replace(k, v.as_deref().unwrap());
            }
            Ok(out)
        }
    }
}
