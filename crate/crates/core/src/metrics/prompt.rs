//! Longest common substring between each corpus match and the prompt.
//!
//! A suffix automaton over the prompt gives, for every end position `j` of
//! the text, the longest suffix of `text[..j]` that occurs in the prompt
//! (`ends[j]`). The longest common substring of a window `text[i..i+r]` and
//! the prompt is then `max over j in (i, i+r] of min(ends[j], j - i)`.
//! `j - ends[j]` is non-decreasing in `j`, which splits the window into a
//! prefix where the `j - i` term binds (maximised at its last position) and a
//! suffix where `ends[j]` binds (a range maximum).

struct State {
    len: usize,
    link: usize,
    /// Outgoing edges; states have few, so a scan beats hashing.
    next: Vec<(char, usize)>,
}

impl State {
    #[inline]
    fn get(&self, c: char) -> Option<usize> {
        self.next.iter().find(|e| e.0 == c).map(|e| e.1)
    }

    fn set(&mut self, c: char, to: usize) {
        match self.next.iter_mut().find(|e| e.0 == c) {
            Some(e) => e.1 = to,
            None => self.next.push((c, to)),
        }
    }
}

/// Suffix automaton of a prompt, answering "longest suffix of the text so far
/// that occurs in the prompt".
pub struct PromptAutomaton {
    states: Vec<State>,
}

const ROOT: usize = 0;

impl PromptAutomaton {
    pub fn new(prompt: &str) -> Self {
        let mut states = vec![State {
            len: 0,
            link: usize::MAX,
            next: Vec::new(),
        }];
        let mut last = ROOT;
        for c in prompt.chars() {
            let cur = states.len();
            states.push(State {
                len: states[last].len + 1,
                link: ROOT,
                next: Vec::new(),
            });
            let mut p = last;
            while p != usize::MAX && states[p].get(c).is_none() {
                states[p].set(c, cur);
                p = states[p].link;
            }
            if p != usize::MAX {
                let q = states[p].get(c).unwrap();
                if states[p].len + 1 == states[q].len {
                    states[cur].link = q;
                } else {
                    let clone = states.len();
                    states.push(State {
                        len: states[p].len + 1,
                        link: states[q].link,
                        next: states[q].next.clone(),
                    });
                    while p != usize::MAX && states[p].get(c) == Some(q) {
                        states[p].set(c, clone);
                        p = states[p].link;
                    }
                    states[q].link = clone;
                    states[cur].link = clone;
                }
            }
            last = cur;
        }
        PromptAutomaton { states }
    }

    /// `out[j]` = length of the longest suffix of `text[..j]` (in chars) that
    /// is a substring of the prompt, for `j` in `0..=n`.
    pub fn suffix_matches(&self, text: &[char]) -> Vec<usize> {
        let mut out = Vec::with_capacity(text.len() + 1);
        out.push(0);
        let (mut state, mut len) = (ROOT, 0usize);
        for &c in text {
            while state != ROOT && self.states[state].get(c).is_none() {
                state = self.states[state].link;
                len = self.states[state].len;
            }
            match self.states[state].get(c) {
                Some(nx) => {
                    state = nx;
                    len += 1;
                }
                None => {
                    state = ROOT;
                    len = 0;
                }
            }
            out.push(len);
        }
        out
    }
}

/// Ranges up to this length are scanned instead of using a `SparseMax`.
const SCAN_LIMIT: usize = 64;

/// Range-maximum table over a fixed array.
struct SparseMax {
    levels: Vec<Vec<usize>>,
}

impl SparseMax {
    fn new(values: &[usize]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while width * 2 <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<usize> = (0..=values.len() - width * 2)
                .map(|i| prev[i].max(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        SparseMax { levels }
    }

    /// Maximum over `lo..hi`, or 0 for an empty range.
    fn max(&self, lo: usize, hi: usize) -> usize {
        if lo >= hi {
            return 0;
        }
        let k = (usize::BITS - 1 - (hi - lo).leading_zeros()) as usize;
        let level = &self.levels[k];
        level[lo].max(level[hi - (1 << k)])
    }
}

/// For each `i`, the length of the longest common substring of
/// `text[i..i + raw[i]]` and the prompt.
pub fn prompt_overlaps(text: &[char], raw: &[usize], prompt: &str) -> Vec<usize> {
    assert_eq!(text.len(), raw.len());
    if prompt.is_empty() || text.is_empty() {
        return vec![0; text.len()];
    }
    let ends = PromptAutomaton::new(prompt).suffix_matches(text);
    // starts[j] = j - ends[j], non-decreasing
    let starts: Vec<usize> = ends.iter().enumerate().map(|(j, &e)| j - e).collect();
    // most ranges are short; the table is only worth building for long ones
    let mut table: Option<SparseMax> = None;
    raw.iter()
        .enumerate()
        .map(|(i, &r)| {
            if r == 0 {
                return 0;
            }
            let (lo, hi) = (i + 1, i + r + 1);
            // first j in lo..hi whose prompt match starts after i
            let split = lo + starts[lo..hi].partition_point(|&s| s <= i);
            let bound = if split > lo { split - 1 - i } else { 0 };
            let tail = if hi - split <= SCAN_LIMIT {
                ends[split..hi].iter().copied().max().unwrap_or(0)
            } else {
                table.get_or_insert_with(|| SparseMax::new(&ends)).max(split, hi)
            };
            bound.max(tail)
        })
        .collect()
}
