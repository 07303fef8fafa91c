use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use super::shard::{Shard, MAX_SHARD_BYTES, SEPARATOR};
use super::{CorpusError, Document};

/// Shards are cut once their text would exceed this many bytes.
pub const DEFAULT_MAX_SHARD_BYTES: usize = 256 << 20;

/// Text normalization applied to documents before indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Exact bytes as supplied.
    #[default]
    None,
    /// Unicode canonical composition.
    Nfc,
}

impl Normalization {
    pub fn apply<'a>(self, text: &'a str) -> Cow<'a, str> {
        match self {
            Normalization::None => Cow::Borrowed(text),
            Normalization::Nfc => {
                if unicode_normalization::is_nfc(text) {
                    Cow::Borrowed(text)
                } else {
                    Cow::Owned(text.nfc().collect())
                }
            }
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Normalization::None => 0,
            Normalization::Nfc => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Normalization::None),
            1 => Some(Normalization::Nfc),
            _ => None,
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Nfc => "nfc",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub normalization: Normalization,
    /// Abort on the first bad document instead of skipping it.
    pub strict: bool,
    pub max_shard_bytes: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            normalization: Normalization::None,
            strict: false,
            max_shard_bytes: DEFAULT_MAX_SHARD_BYTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDocument {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BuildReport {
    pub skipped: Vec<SkippedDocument>,
}

/// Where a document's text lives inside the index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub doc_id: String,
    pub shard: u32,
    pub byte_start: u64,
    pub byte_len: u64,
    pub char_len: u64,
}

/// Streams documents into a SHA-256 content digest.
pub(crate) struct DigestBuilder(Sha256);

impl DigestBuilder {
    pub(crate) fn new(normalization: Normalization) -> Self {
        let mut h = Sha256::new();
        h.update(b"verbatim-corpus\0");
        h.update(normalization.code().to_le_bytes());
        DigestBuilder(h)
    }

    pub(crate) fn add(&mut self, doc_id: &str, content: &str) {
        self.0.update((doc_id.len() as u64).to_le_bytes());
        self.0.update(doc_id.as_bytes());
        self.0.update((content.len() as u64).to_le_bytes());
        self.0.update(content.as_bytes());
    }

    pub(crate) fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}

/// Anything that can answer longest-prefix queries against a corpus.
pub trait MatchSource: Sync {
    /// For every `starts[k]`, raises `out[k]` to the byte length of the longest
    /// prefix of `query[starts[k]..]` that occurs contiguously in the corpus.
    fn raise_prefix_bytes(&self, query: &[u8], starts: &[usize], out: &mut [usize]);

    fn normalization(&self) -> Normalization;

    /// Largest `k` such that the first `k` characters of `query` occur in
    /// some document. Matching is exact and case-sensitive.
    fn longest_match_len(&self, query: &str) -> usize {
        if query.is_empty() {
            return 0;
        }
        let mut out = [0usize];
        self.raise_prefix_bytes(query.as_bytes(), &[0], &mut out);
        let mut end = out[0];
        while !query.is_char_boundary(end) {
            end -= 1;
        }
        query[..end].chars().count()
    }

    /// `longest_match_len` of every suffix of `text`, indexed by character.
    fn match_lengths(&self, text: &str) -> Vec<usize> {
        let mut starts = Vec::with_capacity(text.len());
        // char index of every byte offset that is a char boundary
        let mut char_at = vec![0u32; text.len() + 1];
        for (ci, (bi, _)) in text.char_indices().enumerate() {
            starts.push(bi);
            char_at[bi] = ci as u32;
        }
        let n_chars = starts.len();
        char_at[text.len()] = n_chars as u32;
        let mut bytes = vec![0usize; n_chars];
        self.raise_prefix_bytes(text.as_bytes(), &starts, &mut bytes);
        starts
            .iter()
            .zip(bytes)
            .map(|(&s, len)| {
                let mut end = s + len;
                while !text.is_char_boundary(end) {
                    end -= 1;
                }
                (char_at[end] - char_at[s]) as usize
            })
            .collect()
    }
}

/// Immutable exact-substring index over a document collection.
pub struct CorpusIndex {
    pub(crate) digest: [u8; 32],
    pub(crate) normalization: Normalization,
    pub(crate) docs: Vec<DocEntry>,
    pub(crate) total_chars: u64,
    pub(crate) shards: Vec<Shard>,
}

impl fmt::Debug for CorpusIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CorpusIndex")
            .field("digest", &self.digest_hex())
            .field("normalization", &self.normalization)
            .field("doc_count", &self.docs.len())
            .field("total_chars", &self.total_chars)
            .field("shards", &self.shards.len())
            .finish()
    }
}

impl CorpusIndex {
    /// Indexes `documents` in order. Bad documents abort the build in strict
    /// mode and are reported and skipped otherwise.
    pub fn build<I>(documents: I, options: &BuildOptions) -> Result<(Self, BuildReport), CorpusError>
    where
        I: IntoIterator<Item = Result<Document, CorpusError>>,
    {
        let max_shard = options.max_shard_bytes.clamp(1, MAX_SHARD_BYTES);
        let mut report = BuildReport::default();
        let mut digest = DigestBuilder::new(options.normalization);
        let mut seen = HashSet::new();
        let mut docs = Vec::new();
        let mut shards = Vec::new();
        let mut current: Vec<u8> = Vec::new();
        let mut total_chars = 0u64;

        let reject = |err: CorpusError, report: &mut BuildReport| -> Result<(), CorpusError> {
            if options.strict {
                return Err(err);
            }
            log::warn!("skipping document: {err}");
            report.skipped.push(SkippedDocument {
                doc_id: err.doc_id().unwrap_or("<unknown>").to_string(),
                reason: err.to_string(),
            });
            Ok(())
        };

        for item in documents {
            let doc = match item {
                Ok(doc) => doc,
                Err(err) => {
                    reject(err, &mut report)?;
                    continue;
                }
            };
            if seen.contains(&doc.doc_id) {
                reject(CorpusError::DuplicateId { doc_id: doc.doc_id }, &mut report)?;
                continue;
            }
            let content = options.normalization.apply(&doc.content);
            let needed = content.len() + 1;
            if needed > MAX_SHARD_BYTES {
                let bytes = content.len();
                reject(CorpusError::TooLarge { doc_id: doc.doc_id, bytes }, &mut report)?;
                continue;
            }
            if !current.is_empty() && current.len() + needed > max_shard {
                log::info!("sorting shard {} ({} bytes)", shards.len(), current.len());
                shards.push(Shard::build(std::mem::take(&mut current)));
            }
            let char_len = content.chars().count() as u64;
            digest.add(&doc.doc_id, &content);
            docs.push(DocEntry {
                doc_id: doc.doc_id.clone(),
                shard: shards.len() as u32,
                byte_start: current.len() as u64,
                byte_len: content.len() as u64,
                char_len,
            });
            total_chars += char_len;
            current.extend_from_slice(content.as_bytes());
            current.push(SEPARATOR);
            seen.insert(doc.doc_id);
        }
        if !current.is_empty() {
            log::info!("sorting shard {} ({} bytes)", shards.len(), current.len());
            shards.push(Shard::build(current));
        }
        let index = CorpusIndex {
            digest: digest.finish(),
            normalization: options.normalization,
            docs,
            total_chars,
            shards,
        };
        Ok((index, report))
    }

    /// Convenience for in-memory corpora; every document must be valid.
    pub fn from_documents<I>(documents: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = Document>,
    {
        let options = BuildOptions {
            strict: true,
            ..BuildOptions::default()
        };
        Ok(Self::build(documents.into_iter().map(Ok), &options)?.0)
    }

    pub fn corpus_digest(&self) -> [u8; 32] {
        self.digest
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn total_chars(&self) -> u64 {
        self.total_chars
    }

    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    pub fn documents(&self) -> &[DocEntry] {
        &self.docs
    }

    /// Indexed (post-normalization) content of document `i`.
    pub fn document_text(&self, i: usize) -> &str {
        let d = &self.docs[i];
        let text = self.shards[d.shard as usize].text();
        let bytes = &text[d.byte_start as usize..(d.byte_start + d.byte_len) as usize];
        std::str::from_utf8(bytes).expect("indexed documents are valid UTF-8")
    }

    /// Recomputes the content digest from the stored documents.
    pub fn recompute_digest(&self) -> [u8; 32] {
        let mut digest = DigestBuilder::new(self.normalization);
        for (i, d) in self.docs.iter().enumerate() {
            digest.add(&d.doc_id, self.document_text(i));
        }
        digest.finish()
    }

    /// Checks that every shard's suffix array is a sorted permutation.
    /// Linear in the corpus size times the average adjacent common prefix.
    pub fn verify_suffix_order(&self) -> Result<(), String> {
        for (s, shard) in self.shards.iter().enumerate() {
            let text = shard.text();
            let sa = shard.suffix_array();
            let mut seen = vec![false; text.len()];
            let mut prev: Option<usize> = None;
            for i in sa.iter() {
                let i = i as usize;
                if i >= text.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(format!("shard {s}: suffix array is not a permutation"));
                }
                if let Some(p) = prev {
                    if text[p..] >= text[i..] {
                        return Err(format!("shard {s}: suffixes {p} and {i} out of order"));
                    }
                }
                prev = Some(i);
            }
        }
        Ok(())
    }

    /// Bytes of heap held by the loaded index.
    pub fn heap_bytes(&self) -> usize {
        self.shards.iter().map(Shard::heap_bytes).sum::<usize>()
            + self.docs.iter().map(|d| d.doc_id.capacity() + std::mem::size_of::<DocEntry>()).sum::<usize>()
    }
}

impl MatchSource for CorpusIndex {
    fn raise_prefix_bytes(&self, query: &[u8], starts: &[usize], out: &mut [usize]) {
        for shard in &self.shards {
            shard.longest_prefixes(query, starts, out);
        }
    }

    fn normalization(&self) -> Normalization {
        self.normalization
    }
}

/// Several separately built indexes queried as one corpus; a query's answer
/// is the maximum over members.
#[derive(Debug)]
pub struct IndexSet {
    members: Vec<CorpusIndex>,
    normalization: Normalization,
}

impl IndexSet {
    pub fn new(members: Vec<CorpusIndex>) -> Result<Self, CorpusError> {
        let normalization = members.first().map(|m| m.normalization).unwrap_or_default();
        if members.iter().any(|m| m.normalization != normalization) {
            return Err(CorpusError::NormalizationMismatch);
        }
        Ok(IndexSet {
            members,
            normalization,
        })
    }

    pub fn members(&self) -> &[CorpusIndex] {
        &self.members
    }

    /// Digest of the member digests, in order. A single member keeps its own
    /// digest.
    pub fn corpus_digest(&self) -> [u8; 32] {
        match self.members.as_slice() {
            [only] => only.digest,
            members => {
                let mut h = Sha256::new();
                h.update(b"verbatim-index-set\0");
                for m in members {
                    h.update(m.digest);
                }
                h.finalize().into()
            }
        }
    }

    pub fn total_chars(&self) -> u64 {
        self.members.iter().map(|m| m.total_chars).sum()
    }

    pub fn doc_count(&self) -> usize {
        self.members.iter().map(|m| m.docs.len()).sum()
    }
}

impl MatchSource for IndexSet {
    fn raise_prefix_bytes(&self, query: &[u8], starts: &[usize], out: &mut [usize]) {
        for m in &self.members {
            m.raise_prefix_bytes(query, starts, out);
        }
    }

    fn normalization(&self) -> Normalization {
        self.normalization
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn index(docs: &[&str]) -> CorpusIndex {
        CorpusIndex::from_documents(
            docs.iter().enumerate().map(|(i, d)| Document::new(format!("d{i}"), *d)),
        )
        .unwrap()
    }

    /// Longest prefix of `query` (in chars) found in any document, by scanning
    /// every start position of every document.
    fn naive_longest(docs: &[&str], query: &str) -> usize {
        let q: Vec<char> = query.chars().collect();
        let mut best = 0;
        for d in docs {
            let d: Vec<char> = d.chars().collect();
            for s in 0..d.len() {
                let k = d[s..].iter().zip(&q).take_while(|(a, b)| a == b).count();
                best = best.max(k);
            }
        }
        best
    }

    #[test]
    fn empty_corpus_answers_zero() {
        let ix = index(&[]);
        assert_eq!(ix.doc_count(), 0);
        assert_eq!(ix.total_chars(), 0);
        assert_eq!(ix.longest_match_len("anything"), 0);
        assert_eq!(ix.match_lengths("abc"), vec![0, 0, 0]);
    }

    #[test]
    fn whole_document_matches() {
        let ix = index(&["abcd"]);
        assert_eq!(ix.longest_match_len("abcd"), 4);
        assert_eq!(ix.longest_match_len(""), 0);
    }

    #[test]
    fn partial_match_stops_at_divergence() {
        let ix = index(&["hello world"]);
        assert_eq!(ix.longest_match_len("world peace"), 5);
    }

    #[test]
    fn matching_is_case_sensitive_and_exact() {
        let ix = index(&["Hello  World"]);
        assert_eq!(ix.longest_match_len("hello"), 0);
        assert_eq!(ix.longest_match_len("Hello World"), 6);
    }

    #[test]
    fn matches_never_span_documents() {
        let ix = index(&["abc", "def"]);
        assert_eq!(ix.longest_match_len("cde"), 1);
        assert_eq!(ix.longest_match_len("abcdef"), 3);
    }

    #[test]
    fn multibyte_lengths_are_in_characters() {
        let ix = index(&["naïve café ☕ über"]);
        assert_eq!(ix.longest_match_len("café ☕!"), 6);
        assert_eq!(ix.match_lengths("é☕"), vec![1, 1]);
        // shares a lead byte with 'ï' but is a different character
        assert_eq!(ix.longest_match_len("naîve"), 2);
    }

    #[test]
    fn duplicate_ids_are_rejected_or_skipped() {
        let docs = || vec![Ok(Document::new("a", "one")), Ok(Document::new("a", "two"))];
        let strict = BuildOptions {
            strict: true,
            ..BuildOptions::default()
        };
        assert!(matches!(
            CorpusIndex::build(docs(), &strict),
            Err(CorpusError::DuplicateId { .. })
        ));
        let (ix, report) = CorpusIndex::build(docs(), &BuildOptions::default()).unwrap();
        assert_eq!(ix.doc_count(), 1);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].doc_id, "a");
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let a = index(&["one", "two"]);
        let b = index(&["one", "two"]);
        let c = index(&["one", "twO"]);
        assert_eq!(a.corpus_digest(), b.corpus_digest());
        assert_ne!(a.corpus_digest(), c.corpus_digest());
        assert_eq!(a.recompute_digest(), a.corpus_digest());
    }

    #[test]
    fn nfc_normalization_is_applied_and_recorded() {
        let decomposed = "cafe\u{301}";
        let opts = BuildOptions {
            normalization: Normalization::Nfc,
            ..BuildOptions::default()
        };
        let (nfc, _) =
            CorpusIndex::build([Ok(Document::new("d", decomposed))], &opts).unwrap();
        let (raw, _) =
            CorpusIndex::build([Ok(Document::new("d", decomposed))], &BuildOptions::default())
                .unwrap();
        assert_eq!(nfc.longest_match_len("caf\u{e9}"), 4);
        assert_eq!(raw.longest_match_len("caf\u{e9}"), 3);
        assert_ne!(nfc.corpus_digest(), raw.corpus_digest());
    }

    #[test]
    fn sharded_build_answers_like_a_single_shard() {
        let docs = ["the quick brown fox", "jumps over the lazy dog", "quick brown dogs jump"];
        let single = index(&docs);
        let opts = BuildOptions {
            max_shard_bytes: 24,
            ..BuildOptions::default()
        };
        let (sharded, _) = CorpusIndex::build(
            docs.iter().enumerate().map(|(i, d)| Ok(Document::new(format!("d{i}"), *d))),
            &opts,
        )
        .unwrap();
        assert_eq!(sharded.shard_count(), 3);
        assert_eq!(sharded.corpus_digest(), single.corpus_digest());
        let q = "a quick brown dog jumps over the lazy fox";
        assert_eq!(sharded.match_lengths(q), single.match_lengths(q));
        sharded.verify_suffix_order().unwrap();
    }

    #[test]
    fn index_set_takes_the_maximum() {
        let set = IndexSet::new(vec![index(&["hello there"]), index(&["general kenobi"])]).unwrap();
        assert_eq!(set.longest_match_len("general"), 7);
        assert_eq!(set.longest_match_len("hello"), 5);
        assert_eq!(set.doc_count(), 2);
    }

    fn small_text() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[ab c\u{e9}\u{2615}]{0,40}").unwrap()
    }

    proptest! {
        #[test]
        fn agrees_with_naive_scan(
            docs in proptest::collection::vec(small_text(), 0..6),
            queries in proptest::collection::vec(small_text(), 1..10),
        ) {
            let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
            let ix = index(&refs);
            for q in &queries {
                let chars: Vec<char> = q.chars().collect();
                let profile = ix.match_lengths(q);
                prop_assert_eq!(profile.len(), chars.len());
                for (i, &got) in profile.iter().enumerate() {
                    let suffix: String = chars[i..].iter().collect();
                    prop_assert_eq!(got, naive_longest(&refs, &suffix));
                }
                prop_assert_eq!(ix.longest_match_len(q), naive_longest(&refs, q));
            }
        }

        #[test]
        fn substring_closure(doc in small_text(), q in small_text()) {
            let ix = index(&[doc.as_str()]);
            let raw = ix.match_lengths(&q);
            for w in raw.windows(2) {
                prop_assert!(w[1] + 1 >= w[0]);
            }
        }
    }
}
