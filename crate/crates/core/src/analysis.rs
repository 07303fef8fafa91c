//! One record through the full measurement pipeline.

use crate::corpus::MatchSource;
use crate::metrics::{extract_snippets, record_seed, reproduction_profile, sample_fixed_windows};
use crate::records::{AnalysisConfig, AnalyzedRecord, TextRecord};

/// Analyzes `record` against `index`. Text and prompt are normalized the
/// same way as the index, so snippet offsets refer to the normalized text.
pub fn analyze_record(
    index: &(impl MatchSource + ?Sized),
    record: &TextRecord,
    config: &AnalysisConfig,
    config_digest: &str,
) -> AnalyzedRecord {
    let text = config.normalization.apply(&record.text);
    let prompt = config.normalization.apply(&record.prompt);
    let profile = reproduction_profile(index, &text, &prompt, config.threshold);
    let snippets = extract_snippets(&text, &profile.reproduction, config.threshold);
    let sampled_windows = sample_fixed_windows(
        &text,
        &profile.reproduction,
        config.window_len,
        config.threshold,
        record_seed(config.seed, &record.record_id),
    );
    AnalyzedRecord {
        record: record.clone(),
        refused: false,
        analyzed_chars: profile.reproduction.len(),
        overlap_rate: profile.overlap_rate,
        max_reproduction_len: profile.max_reproduction_len(),
        reproduced_chars: profile.reproduced_chars(config.threshold),
        snippets,
        sampled_windows,
        config_digest: config_digest.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusIndex, Document};
    use crate::records::{SystemPromptCondition, TextType};

    #[test]
    fn planted_record() {
        let passage: String = (0..100).map(|i| (b'a' + (i * 7 % 26) as u8) as char).collect();
        let ix = CorpusIndex::from_documents([Document::new("d", format!("<{passage}>"))]).unwrap();
        let record = TextRecord {
            record_id: "r".into(),
            source: "m".into(),
            task: "satire".into(),
            text_type: TextType::Creative,
            prompt: "0123".into(),
            text: format!("{}{passage}{}", "0 ".repeat(25), " 1".repeat(25)),
            seed: None,
            temperature: None,
            system_prompt_condition: SystemPromptCondition::None,
            api_refused: false,
            seed_supported: None,
        };
        let config = AnalysisConfig::default();
        let a = analyze_record(&ix, &record, &config, "d");
        assert_eq!(a.overlap_rate, 0.5);
        assert_eq!((a.max_reproduction_len, a.reproduced_chars, a.analyzed_chars), (100, 100, 200));
        assert_eq!(a.snippets.len(), 1);
        assert_eq!(a.snippets[0].start, 50);
        let w = a.sampled_windows.non_reproduced.unwrap();
        assert_eq!(w.length, 50);
        assert!(w.text.chars().all(|c| c == '0' || c == '1' || c == ' '));
    }
}
