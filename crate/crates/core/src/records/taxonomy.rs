use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::TextType;

pub const TOPIC_PLACEHOLDER: &str = "{topic}";

const BUILTIN: &str = include_str!("../../data/taxonomy.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: String,
    pub text_type: TextType,
    /// Prompt templates with a `{topic}` placeholder.
    pub templates: Vec<String>,
    /// Sample topics for the templates.
    #[serde(default)]
    pub examples: Vec<String>,
}

impl TaskSpec {
    pub fn instantiate(&self, template: usize, topic: &str) -> Option<String> {
        self.templates
            .get(template)
            .map(|t| t.replace(TOPIC_PLACEHOLDER, topic))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Taxonomy {
    pub tasks: Vec<TaskSpec>,
}

impl Taxonomy {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.task == name)
    }

    pub fn tasks_of(&self, text_type: TextType) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.iter().filter(move |t| t.text_type == text_type)
    }

    /// Distinct text types in first-seen order.
    pub fn text_types(&self) -> Vec<TextType> {
        let mut out = Vec::new();
        for t in &self.tasks {
            if !out.contains(&t.text_type) {
                out.push(t.text_type);
            }
        }
        out
    }
}

/// The fifteen tasks across creative, expository and argumentative writing.
pub fn builtin_taxonomy() -> &'static Taxonomy {
    static TAXONOMY: OnceLock<Taxonomy> = OnceLock::new();
    TAXONOMY.get_or_init(|| Taxonomy::from_json(BUILTIN).expect("bundled taxonomy parses"))
}
