//! Fixed-width bit-packed unsigned integers.
//!
//! Suffix array entries only need `ceil(log2(n))` bits each, so the array is
//! stored packed both in memory and on disk. Values are laid out
//! little-endian across `u32` words; one zero word of padding follows the last
//! value so that every read can fetch two consecutive words.

/// A read-only array of `len` integers, each `width` bits wide.
#[derive(Clone, PartialEq, Eq)]
pub struct PackedArray {
    width: u32,
    len: usize,
    words: Vec<u32>,
}

impl std::fmt::Debug for PackedArray {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PackedArray")
            .field("width", &self.width)
            .field("len", &self.len)
            .finish()
    }
}

/// Number of bits needed to represent every value in `0..=max`.
pub fn bits_for(max: u64) -> u32 {
    (u64::BITS - max.leading_zeros()).max(1)
}

/// Number of `u32` words (including padding) for `len` values of `width` bits.
pub fn word_count(len: usize, width: u32) -> usize {
    (len * width as usize).div_ceil(32) + 1
}

impl PackedArray {
    /// Packs `values` in place, reusing their allocation.
    ///
    /// Every value must fit in `width` bits. Writing value `k` only touches
    /// words at index `<= k`, and value `k` has been read by then, so the
    /// packed stream can overwrite the unpacked one as it goes.
    pub fn pack_in_place(mut values: Vec<u32>, width: u32) -> PackedArray {
        assert!((1..=32).contains(&width), "width out of range: {width}");
        let len = values.len();
        let needed = word_count(len, width);
        if values.len() < needed {
            values.resize(needed, 0);
        }
        let mask = if width == 32 { u64::MAX >> 32 } else { (1u64 << width) - 1 };
        let mut acc: u64 = 0;
        let mut acc_bits = 0u32;
        let mut out = 0usize;
        for k in 0..len {
            let v = values[k] as u64;
            debug_assert!(v <= mask, "value {v} does not fit in {width} bits");
            acc |= (v & mask) << acc_bits;
            acc_bits += width;
            while acc_bits >= 32 {
                values[out] = acc as u32;
                out += 1;
                acc >>= 32;
                acc_bits -= 32;
            }
        }
        if acc_bits > 0 {
            values[out] = acc as u32;
            out += 1;
        }
        for w in &mut values[out..needed] {
            *w = 0;
        }
        values.truncate(needed);
        values.shrink_to_fit();
        PackedArray { width, len, words: values }
    }

    pub fn from_values(values: &[u64], width: u32) -> PackedArray {
        let mut words = vec![0u32; word_count(values.len(), width)];
        for (k, &v) in values.iter().enumerate() {
            let bit = k * width as usize;
            let (w, off) = (bit / 32, bit % 32);
            let wide = v << off;
            words[w] |= wide as u32;
            words[w + 1] |= (wide >> 32) as u32;
        }
        PackedArray { width, len: values.len(), words }
    }

    /// Rebuilds an array from its raw parts, as read back from disk.
    pub fn from_raw_parts(width: u32, len: usize, words: Vec<u32>) -> Option<PackedArray> {
        if !(1..=32).contains(&width) || words.len() != word_count(len, width) {
            return None;
        }
        Some(PackedArray { width, len, words })
    }

    #[inline]
    pub fn get(&self, index: usize) -> u32 {
        debug_assert!(index < self.len);
        let bit = index * self.width as usize;
        let w = bit / 32;
        let pair = self.words[w] as u64 | (self.words[w + 1] as u64) << 32;
        let mask = (1u64 << self.width) - 1;
        ((pair >> (bit % 32)) & mask) as u32
    }

    /// Address of the word holding the start of `index`, for prefetching.
    #[inline]
    pub fn word_ptr(&self, index: usize) -> *const u32 {
        let w = index * self.width as usize / 32;
        self.words[w..].as_ptr()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn heap_bytes(&self) -> usize {
        self.words.capacity() * std::mem::size_of::<u32>()
    }
}
