use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnippetKind {
    MaximalSpan,
    FixedWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReproducedSnippet {
    /// Offset in characters.
    pub start: usize,
    /// Length in characters.
    pub length: usize,
    pub text: String,
    pub kind: SnippetKind,
}

/// One reproduced and one non-reproduced window drawn from a text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledWindows {
    pub reproduced: Option<ReproducedSnippet>,
    pub non_reproduced: Option<ReproducedSnippet>,
}

fn char_offsets(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    offsets.push(text.len());
    offsets
}

fn slice(text: &str, offsets: &[usize], start: usize, length: usize, kind: SnippetKind) -> ReproducedSnippet {
    ReproducedSnippet {
        start,
        length,
        text: text[offsets[start]..offsets[start + length]].to_string(),
        kind,
    }
}

/// Maximal runs of characters whose reproduction length reaches `threshold`.
pub fn extract_snippets(text: &str, reproduction: &[usize], threshold: usize) -> Vec<ReproducedSnippet> {
    let offsets = char_offsets(text);
    assert_eq!(offsets.len() - 1, reproduction.len(), "profile does not match text");
    let mut out = Vec::new();
    let mut i = 0;
    while i < reproduction.len() {
        if reproduction[i] < threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < reproduction.len() && reproduction[i] >= threshold {
            i += 1;
        }
        out.push(slice(text, &offsets, start, i - start, SnippetKind::MaximalSpan));
    }
    out
}

/// Start offsets of every `window_len`-character window beginning at a word
/// boundary, split into windows made only of reproduced characters and
/// windows made only of non-reproduced characters.
pub fn window_candidates(
    text: &str,
    reproduction: &[usize],
    window_len: usize,
    threshold: usize,
) -> (Vec<usize>, Vec<usize>) {
    let chars: Vec<char> = text.chars().collect();
    assert_eq!(chars.len(), reproduction.len(), "profile does not match text");
    let (mut reproduced, mut other) = (Vec::new(), Vec::new());
    if window_len == 0 || window_len > chars.len() {
        return (reproduced, other);
    }
    // above[i] = count of reproduced characters in [0, i)
    let mut above = vec![0usize; chars.len() + 1];
    for (i, &r) in reproduction.iter().enumerate() {
        above[i + 1] = above[i] + usize::from(r >= threshold);
    }
    for s in 0..=chars.len() - window_len {
        if s > 0 && !chars[s - 1].is_whitespace() {
            continue;
        }
        match above[s + window_len] - above[s] {
            0 => other.push(s),
            k if k == window_len => reproduced.push(s),
            _ => {}
        }
    }
    (reproduced, other)
}

/// Per-record sampler seed, so that sampling does not depend on the order in
/// which records are processed.
pub fn record_seed(seed: u64, record_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(record_id.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Draws one window uniformly from each candidate class.
pub fn sample_fixed_windows(
    text: &str,
    reproduction: &[usize],
    window_len: usize,
    threshold: usize,
    rng_seed: u64,
) -> SampledWindows {
    let (reproduced, other) = window_candidates(text, reproduction, window_len, threshold);
    let offsets = char_offsets(text);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut pick = |starts: &[usize]| {
        (!starts.is_empty()).then(|| {
            let s = starts[rng.random_range(0..starts.len())];
            slice(text, &offsets, s, window_len, SnippetKind::FixedWindow)
        })
    };
    let reproduced = pick(&reproduced);
    let non_reproduced = pick(&other);
    SampledWindows {
        reproduced,
        non_reproduced,
    }
}
