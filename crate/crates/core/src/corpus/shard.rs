//! One independently indexed slice of the corpus.
//!
//! A shard is the concatenation of its documents, each followed by a `0xFF`
//! separator byte, plus the suffix array of that byte string. `0xFF` never
//! occurs in UTF-8, so a query can never match across a document boundary.
//!
//! Longest-prefix queries are answered by binary search over the suffix
//! array. Searches for many query positions are interleaved in lanes so that
//! the suffix array and text reads of one lane are in flight while the others
//! compare; a single search is a chain of dependent cache misses otherwise.

use super::packed::{bits_for, PackedArray};

pub(crate) const SEPARATOR: u8 = 0xFF;

/// Largest shard text divsufsort can index (it uses `i32` offsets).
pub(crate) const MAX_SHARD_BYTES: usize = i32::MAX as usize;

const LANES: usize = 32;

pub(crate) struct Shard {
    text: Vec<u8>,
    sa: PackedArray,
    /// Suffix-array range `[start, end)` for every two-byte prefix.
    pairs: Vec<(u32, u32)>,
    /// Suffix-array range start for every first byte; `first[256]` is the end.
    first: Vec<u32>,
}

#[derive(Clone, Copy, Default)]
struct Lane {
    slot: usize,
    start: usize,
    lo: usize,
    hi: usize,
    lo_lcp: usize,
    hi_lcp: usize,
    best: usize,
    mid: usize,
    suffix: usize,
}

#[inline]
fn common_prefix(a: &[u8], b: &[u8]) -> usize {
    let n = a.len().min(b.len());
    let mut i = 0;
    while i + 8 <= n {
        let x = u64::from_le_bytes(a[i..i + 8].try_into().unwrap())
            ^ u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        if x != 0 {
            return i + (x.trailing_zeros() / 8) as usize;
        }
        i += 8;
    }
    while i < n && a[i] == b[i] {
        i += 1;
    }
    i
}

#[inline(always)]
fn prefetch<T>(ptr: *const T) {
    #[cfg(target_arch = "x86_64")]
    unsafe {
        std::arch::x86_64::_mm_prefetch(ptr as *const i8, std::arch::x86_64::_MM_HINT_T0);
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = ptr;
}

impl Shard {
    /// Sorts the suffixes of `text`, which must already end with a separator.
    pub(crate) fn build(text: Vec<u8>) -> Shard {
        assert!(text.len() <= MAX_SHARD_BYTES, "shard text too large");
        let mut buf = super::mem::zeroed_vec::<u8>(text.len());
        buf.copy_from_slice(&text);
        drop(text);
        let text = buf;
        let mut sa = super::mem::zeroed_vec::<i32>(text.len());
        divsufsort::sort_in_place(&text, &mut sa);
        let sa: Vec<u32> = bytemuck::cast_vec(sa);
        let width = bits_for(text.len().saturating_sub(1) as u64);
        let sa = PackedArray::pack_in_place(sa, width);
        Shard::from_parts(text, sa)
    }

    pub(crate) fn from_parts(text: Vec<u8>, sa: PackedArray) -> Shard {
        debug_assert_eq!(text.len(), sa.len());
        let mut counts = vec![0u32; 1 << 16];
        for w in text.windows(2) {
            counts[(w[0] as usize) << 8 | w[1] as usize] += 1;
        }
        let last = text.last().copied();
        let mut pairs = vec![(0u32, 0u32); 1 << 16];
        let mut first = vec![0u32; 257];
        let mut acc = 0u32;
        for (b0, start) in first.iter_mut().take(256).enumerate() {
            *start = acc;
            // The one-byte suffix sorts before every longer suffix with the same first byte.
            if last == Some(b0 as u8) {
                acc += 1;
            }
            for b1 in 0..256usize {
                let k = b0 << 8 | b1;
                pairs[k] = (acc, acc + counts[k]);
                acc += counts[k];
            }
        }
        first[256] = acc;
        debug_assert_eq!(acc as usize, text.len());
        Shard {
            text,
            sa,
            pairs,
            first,
        }
    }

    pub(crate) fn text(&self) -> &[u8] {
        &self.text
    }

    pub(crate) fn suffix_array(&self) -> &PackedArray {
        &self.sa
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        self.text.capacity()
            + self.sa.heap_bytes()
            + self.pairs.capacity() * std::mem::size_of::<(u32, u32)>()
            + self.first.capacity() * std::mem::size_of::<u32>()
    }

    /// Seeds a lane for `query[start..]`, or resolves it directly when the
    /// first two bytes never occur together in this shard.
    #[inline]
    fn seed(&self, query: &[u8], slot: usize, start: usize, out: &mut [usize]) -> Option<Lane> {
        let q = &query[start..];
        if q.is_empty() {
            return None;
        }
        if q.len() >= 2 {
            let (lo, hi) = self.pairs[(q[0] as usize) << 8 | q[1] as usize];
            if lo < hi {
                return Some(Lane {
                    slot,
                    start,
                    lo: lo as usize,
                    hi: hi as usize,
                    lo_lcp: 2,
                    hi_lcp: 2,
                    best: 2,
                    ..Lane::default()
                });
            }
        }
        let b = q[0] as usize;
        if self.first[b] < self.first[b + 1] {
            out[slot] = out[slot].max(1);
        }
        None
    }

    /// For every `starts[k]`, raises `out[k]` to the length in bytes of the
    /// longest prefix of `query[starts[k]..]` that occurs in this shard.
    pub(crate) fn longest_prefixes(&self, query: &[u8], starts: &[usize], out: &mut [usize]) {
        assert_eq!(starts.len(), out.len());
        if self.text.is_empty() {
            return;
        }
        let mut lanes = [Lane::default(); LANES];
        let mut live = [false; LANES];
        let mut next = 0usize;
        let mut active = 0usize;

        let refill = |next: &mut usize, out: &mut [usize]| -> Option<Lane> {
            while *next < starts.len() {
                let slot = *next;
                *next += 1;
                if let Some(lane) = self.seed(query, slot, starts[slot], out) {
                    return Some(lane);
                }
            }
            None
        };

        for k in 0..LANES {
            if let Some(lane) = refill(&mut next, out) {
                lanes[k] = lane;
                live[k] = true;
                active += 1;
            }
        }

        while active > 0 {
            for k in 0..LANES {
                if live[k] {
                    let lane = &mut lanes[k];
                    lane.mid = lane.lo + (lane.hi - lane.lo) / 2;
                    prefetch(self.sa.word_ptr(lane.mid));
                }
            }
            for k in 0..LANES {
                if live[k] {
                    let lane = &mut lanes[k];
                    lane.suffix = self.sa.get(lane.mid) as usize;
                    let at = (lane.suffix + lane.lo_lcp.min(lane.hi_lcp)).min(self.text.len() - 1);
                    prefetch(self.text[at..].as_ptr());
                }
            }
            for k in 0..LANES {
                if !live[k] {
                    continue;
                }
                let lane = &mut lanes[k];
                let q = &query[lane.start..];
                let suffix = &self.text[lane.suffix..];
                let known = lane.lo_lcp.min(lane.hi_lcp);
                let l = known + common_prefix(&q[known..], &suffix[known..]);
                lane.best = lane.best.max(l);
                let done = if l == q.len() {
                    true
                } else {
                    if l == suffix.len() || suffix[l] < q[l] {
                        lane.lo = lane.mid + 1;
                        lane.lo_lcp = l;
                    } else {
                        lane.hi = lane.mid;
                        lane.hi_lcp = l;
                    }
                    lane.lo >= lane.hi
                };
                if done {
                    out[lane.slot] = out[lane.slot].max(lane.best);
                    match refill(&mut next, out) {
                        Some(fresh) => lanes[k] = fresh,
                        None => {
                            live[k] = false;
                            active -= 1;
                        }
                    }
                }
            }
        }
    }
}
