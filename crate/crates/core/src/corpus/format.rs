//! On-disk index layout. All integers are little-endian.
//!
//! ```text
//! magic         8 bytes   b"VRBTMIDX"
//! version       u32       FORMAT_VERSION
//! normalization u32       0 = none, 1 = NFC
//! corpus_digest 32 bytes  SHA-256 over (doc_id, content) of every document
//! doc_count     u64
//! total_chars   u64
//! shard_count   u32
//! doc_count x   { shard u32, byte_start u64, byte_len u64, char_len u64,
//!                 id_len u32, id bytes }
//! shard_count x { text_len u64, text bytes,
//!                 sa_width u32, sa_len u64, word_count u64, words u32 x word_count }
//! checksum      u32       CRC-32 of every preceding byte
//! ```
//!
//! A shard's text is its documents' contents, each followed by one `0xFF`
//! byte; `sa` is the bit-packed suffix array of that text.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::index::{CorpusIndex, DocEntry, Normalization};
use super::packed::{word_count, PackedArray};
use super::shard::Shard;
use super::CorpusError;

pub const MAGIC: [u8; 8] = *b"VRBTMIDX";
pub const FORMAT_VERSION: u32 = 1;

struct HashingWriter<W> {
    inner: W,
    crc: crc32fast::Hasher,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.crc.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

struct HashingReader<R> {
    inner: R,
    crc: crc32fast::Hasher,
    /// Bytes left before the trailing checksum.
    remaining: u64,
}

impl<R: Read> HashingReader<R> {
    /// Fails unless `n` more bytes precede the checksum; guards allocations
    /// sized from untrusted length fields.
    fn check(&self, n: u64, what: &str) -> Result<(), CorpusError> {
        if n > self.remaining {
            return Err(CorpusError::Integrity(format!(
                "{what} claims {n} bytes but only {} remain (file truncated or corrupt)",
                self.remaining
            )));
        }
        Ok(())
    }

    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<(), CorpusError> {
        self.check(buf.len() as u64, what)?;
        self.remaining -= buf.len() as u64;
        self.inner.read_exact(buf).map_err(|e| {
            CorpusError::Integrity(format!("reading {what}: {e}"))
        })?;
        self.crc.update(buf);
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32, CorpusError> {
        let mut b = [0u8; 4];
        self.exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CorpusError> {
        let mut b = [0u8; 8];
        self.exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn bytes(&mut self, len: u64, what: &str) -> Result<Vec<u8>, CorpusError> {
        self.check(len, what)?;
        let mut v = super::mem::zeroed_vec::<u8>(len as usize);
        self.exact(&mut v, what)?;
        Ok(v)
    }
}

impl CorpusIndex {
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |e| CorpusError::io(path, e);
        let file = File::create(path).map_err(io_err)?;
        let mut w = HashingWriter {
            inner: BufWriter::with_capacity(1 << 20, file),
            crc: crc32fast::Hasher::new(),
        };
        self.write_to(&mut w).map_err(io_err)?;
        let crc = w.crc.clone().finalize();
        let mut inner = w.inner;
        inner.write_all(&crc.to_le_bytes()).map_err(io_err)?;
        inner.flush().map_err(io_err)?;
        inner.get_ref().sync_all().map_err(io_err)?;
        Ok(())
    }

    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.normalization.code().to_le_bytes())?;
        w.write_all(&self.digest)?;
        w.write_all(&(self.docs.len() as u64).to_le_bytes())?;
        w.write_all(&self.total_chars.to_le_bytes())?;
        w.write_all(&(self.shards.len() as u32).to_le_bytes())?;
        for d in &self.docs {
            w.write_all(&d.shard.to_le_bytes())?;
            w.write_all(&d.byte_start.to_le_bytes())?;
            w.write_all(&d.byte_len.to_le_bytes())?;
            w.write_all(&d.char_len.to_le_bytes())?;
            w.write_all(&(d.doc_id.len() as u32).to_le_bytes())?;
            w.write_all(d.doc_id.as_bytes())?;
        }
        for shard in &self.shards {
            let text = shard.text();
            w.write_all(&(text.len() as u64).to_le_bytes())?;
            w.write_all(text)?;
            let sa = shard.suffix_array();
            w.write_all(&sa.width().to_le_bytes())?;
            w.write_all(&(sa.len() as u64).to_le_bytes())?;
            w.write_all(&(sa.words().len() as u64).to_le_bytes())?;
            if cfg!(target_endian = "little") {
                w.write_all(bytemuck::cast_slice(sa.words()))?;
            } else {
                for word in sa.words() {
                    w.write_all(&word.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CorpusIndex, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let file_len = file.metadata().map_err(|e| CorpusError::io(path, e))?.len();
        let mut r = BufReader::with_capacity(1 << 20, file);

        let mut magic = [0u8; 8];
        let mut version = [0u8; 4];
        let header_ok = r.read_exact(&mut magic).is_ok() && r.read_exact(&mut version).is_ok();
        if !header_ok || magic != MAGIC {
            return Err(CorpusError::BadMagic);
        }
        let version = u32::from_le_bytes(version);
        if version != FORMAT_VERSION {
            return Err(CorpusError::VersionUnsupported {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let mut crc = crc32fast::Hasher::new();
        crc.update(&magic);
        crc.update(&version.to_le_bytes());
        let mut r = HashingReader {
            inner: r,
            crc,
            remaining: file_len.saturating_sub(12 + 4),
        };

        let normalization = Normalization::from_code(r.u32("normalization")?)
            .ok_or_else(|| CorpusError::Integrity("unknown normalization code".into()))?;
        let mut digest = [0u8; 32];
        r.exact(&mut digest, "corpus digest")?;
        let doc_count = r.u64("doc count")?;
        let total_chars = r.u64("total chars")?;
        let shard_count = r.u32("shard count")?;
        // smallest possible doc entry is 32 bytes, smallest shard 20
        r.check(doc_count.saturating_mul(32), "document table")?;
        r.check(u64::from(shard_count) * 20, "shard table")?;

        let mut docs = Vec::with_capacity(doc_count as usize);
        for _ in 0..doc_count {
            let shard = r.u32("doc shard")?;
            let byte_start = r.u64("doc offset")?;
            let byte_len = r.u64("doc length")?;
            let char_len = r.u64("doc chars")?;
            let id_len = r.u32("doc id length")?;
            let id = r.bytes(id_len as u64, "doc id")?;
            let doc_id = String::from_utf8(id)
                .map_err(|_| CorpusError::Integrity("doc id is not UTF-8".into()))?;
            docs.push(DocEntry {
                doc_id,
                shard,
                byte_start,
                byte_len,
                char_len,
            });
        }

        let mut shards = Vec::with_capacity(shard_count as usize);
        for _ in 0..shard_count {
            let text_len = r.u64("shard text length")?;
            let text = r.bytes(text_len, "shard text")?;
            let width = r.u32("suffix array width")?;
            let sa_len = r.u64("suffix array length")?;
            let words = r.u64("suffix array words")?;
            if sa_len != text_len || !(1..=32).contains(&width) {
                return Err(CorpusError::Integrity("suffix array header mismatch".into()));
            }
            if words != word_count(sa_len as usize, width) as u64 {
                return Err(CorpusError::Integrity("suffix array word count mismatch".into()));
            }
            r.check(words.saturating_mul(4), "suffix array")?;
            let mut buf = super::mem::zeroed_vec::<u32>(words as usize);
            r.exact(bytemuck::cast_slice_mut(&mut buf), "suffix array")?;
            if cfg!(target_endian = "big") {
                for w in &mut buf {
                    *w = u32::from_le(*w);
                }
            }
            let sa = PackedArray::from_raw_parts(width, sa_len as usize, buf)
                .ok_or_else(|| CorpusError::Integrity("suffix array layout".into()))?;
            shards.push((text, sa));
        }

        let computed = r.crc.clone().finalize();
        let mut stored = [0u8; 4];
        r.inner
            .read_exact(&mut stored)
            .map_err(|_| CorpusError::Integrity("missing checksum (file truncated)".into()))?;
        if u32::from_le_bytes(stored) != computed {
            return Err(CorpusError::Integrity("checksum mismatch".into()));
        }
        if r.remaining != 0 || r.inner.read(&mut [0u8; 1]).map(|n| n != 0).unwrap_or(true) {
            return Err(CorpusError::Integrity("trailing bytes after checksum".into()));
        }

        for d in &docs {
            let ok = (d.shard as usize) < shards.len()
                && d.byte_start
                    .checked_add(d.byte_len)
                    .is_some_and(|end| end <= shards[d.shard as usize].0.len() as u64);
            if !ok {
                return Err(CorpusError::Integrity(format!(
                    "document {} lies outside its shard",
                    d.doc_id
                )));
            }
        }

        Ok(CorpusIndex {
            digest,
            normalization,
            docs,
            total_chars,
            shards: shards
                .into_iter()
                .map(|(text, sa)| Shard::from_parts(text, sa))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, MatchSource};

    fn sample() -> CorpusIndex {
        CorpusIndex::from_documents(vec![
            Document::new("a", "the quick brown fox"),
            Document::new("b", "jumps over the lazy dog ☕"),
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_answers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ix.bin");
        let ix = sample();
        ix.save(&path).unwrap();
        let back = CorpusIndex::load(&path).unwrap();
        assert_eq!(back.corpus_digest(), ix.corpus_digest());
        assert_eq!(back.documents(), ix.documents());
        assert_eq!(back.recompute_digest(), ix.corpus_digest());
        let q = "a lazy dog ☕ jumps over the quick brown cat";
        assert_eq!(back.match_lengths(q), ix.match_lengths(q));
    }

    #[test]
    fn empty_index_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        let ix = CorpusIndex::from_documents(Vec::new()).unwrap();
        ix.save(&path).unwrap();
        let back = CorpusIndex::load(&path).unwrap();
        assert_eq!(back.doc_count(), 0);
        assert_eq!(back.longest_match_len("x"), 0);
    }

    fn saved_bytes() -> (tempfile::TempDir, std::path::PathBuf, Vec<u8>) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ix.bin");
        sample().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        (dir, path, bytes)
    }

    #[test]
    fn corrupted_checksum_is_an_integrity_error() {
        let (_dir, path, mut bytes) = saved_bytes();
        *bytes.last_mut().unwrap() ^= 0x5A;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(CorpusIndex::load(&path), Err(CorpusError::Integrity(_))));
    }

    #[test]
    fn corrupted_payload_is_an_integrity_error() {
        let (_dir, path, mut bytes) = saved_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(CorpusIndex::load(&path), Err(CorpusError::Integrity(_))));
    }

    #[test]
    fn truncated_file_is_an_integrity_error() {
        let (_dir, path, bytes) = saved_bytes();
        for cut in [20, 60, bytes.len() - 3] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(
                matches!(CorpusIndex::load(&path), Err(CorpusError::Integrity(_))),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn bumped_version_is_rejected() {
        let (_dir, path, mut bytes) = saved_bytes();
        bytes[8] = bytes[8].wrapping_add(1);
        std::fs::write(&path, &bytes).unwrap();
        match CorpusIndex::load(&path) {
            Err(CorpusError::VersionUnsupported { found, expected }) => {
                assert_eq!(found, FORMAT_VERSION + 1);
                assert_eq!(expected, FORMAT_VERSION);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let (_dir, path, mut bytes) = saved_bytes();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(CorpusIndex::load(&path), Err(CorpusError::BadMagic)));
    }
}
