//! Per-character reproduction measurement for a single generated text.
//!
//! The pipeline is `match_profile` → `prompt_discount` →
//! `reproduction_lengths` → `overlap_rate`. All lengths and offsets are in
//! Unicode scalar values.

mod prompt;
mod reproduction;
mod snippets;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MatchSource;

pub use prompt::{prompt_overlaps, PromptAutomaton};
pub use reproduction::reproduction_lengths;
pub use snippets::{
    extract_snippets, record_seed, sample_fixed_windows, window_candidates, ReproducedSnippet,
    SampledWindows, SnippetKind,
};

pub const DEFAULT_THRESHOLD: usize = 50;
pub const DEFAULT_WINDOW_LEN: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("profile length mismatch: raw has {raw} entries, discounted has {discounted}")]
    LengthMismatch { raw: usize, discounted: usize },
    #[error("discounted[{index}] = {discounted} exceeds raw[{index}] = {raw}")]
    DiscountExceedsRaw {
        index: usize,
        raw: usize,
        discounted: usize,
    },
}

/// Longest corpus match starting at every character of a text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchProfile {
    pub raw: Vec<usize>,
}

impl MatchProfile {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Checks `raw[i] <= n - i` and `raw[i + 1] >= raw[i] - 1`.
    pub fn is_consistent(&self) -> bool {
        let n = self.raw.len();
        self.raw.iter().enumerate().all(|(i, &r)| r <= n - i)
            && self.raw.windows(2).all(|w| w[1] + 1 >= w[0])
    }
}

pub fn match_profile(index: &(impl MatchSource + ?Sized), text: &str) -> MatchProfile {
    MatchProfile {
        raw: index.match_lengths(text),
    }
}

/// Splits every raw match into the part shared with the prompt (its longest
/// common substring with `prompt`) and the remainder.
///
/// Returns `(prompt_overlap, discounted)`.
pub fn prompt_discount(profile: &MatchProfile, text: &str, prompt: &str) -> (Vec<usize>, Vec<usize>) {
    let chars: Vec<char> = text.chars().collect();
    assert_eq!(chars.len(), profile.len(), "profile does not match text");
    let overlap = prompt_overlaps(&chars, &profile.raw, prompt);
    let discounted = profile.raw.iter().zip(&overlap).map(|(r, o)| r - o).collect();
    (overlap, discounted)
}

/// Fraction of characters whose reproduction length reaches `threshold`;
/// 0 for an empty text.
pub fn overlap_rate(reproduction: &[usize], threshold: usize) -> f64 {
    if reproduction.is_empty() {
        return 0.0;
    }
    let hits = reproduction.iter().filter(|&&r| r >= threshold).count();
    hits as f64 / reproduction.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionProfile {
    pub raw: Vec<usize>,
    pub prompt_overlap: Vec<usize>,
    pub discounted: Vec<usize>,
    pub reproduction: Vec<usize>,
    pub overlap_rate: f64,
}

impl ReproductionProfile {
    pub fn max_reproduction_len(&self) -> usize {
        self.reproduction.iter().copied().max().unwrap_or(0)
    }

    pub fn reproduced_chars(&self, threshold: usize) -> usize {
        self.reproduction.iter().filter(|&&r| r >= threshold).count()
    }
}

/// Runs the whole pipeline for one text.
pub fn reproduction_profile(
    index: &(impl MatchSource + ?Sized),
    text: &str,
    prompt: &str,
    threshold: usize,
) -> ReproductionProfile {
    let profile = match_profile(index, text);
    let (prompt_overlap, discounted) = prompt_discount(&profile, text, prompt);
    let reproduction =
        reproduction_lengths(&profile.raw, &discounted).expect("discount never exceeds raw");
    let overlap_rate = overlap_rate(&reproduction, threshold);
    ReproductionProfile {
        raw: profile.raw,
        prompt_overlap,
        discounted,
        reproduction,
        overlap_rate,
    }
}
