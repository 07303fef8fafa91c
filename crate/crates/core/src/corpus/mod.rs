//! Reference corpus ingestion and the exact-substring index standing in for
//! "found in the training data".

mod format;
mod index;
mod mem;
mod packed;
mod shard;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{FORMAT_VERSION, MAGIC};
pub use index::{
    BuildOptions, BuildReport, CorpusIndex, DocEntry, IndexSet, MatchSource, Normalization,
    SkippedDocument, DEFAULT_MAX_SHARD_BYTES,
};
pub use packed::PackedArray;

/// One searchable document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub content: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, content: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            content: content.into(),
        }
    }

    pub fn byte_len(&self) -> usize {
        self.content.len()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document {doc_id}: content is not valid UTF-8: {source}")]
    Undecodable {
        doc_id: String,
        source: std::str::Utf8Error,
    },
    #[error("document {doc_id}: duplicate doc_id")]
    DuplicateId { doc_id: String },
    #[error("document {doc_id}: {bytes} bytes does not fit in a single shard")]
    TooLarge { doc_id: String, bytes: usize },
    #[error("{}:{line}: {message}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not an index file (bad magic bytes)")]
    BadMagic,
    #[error("index format version {found} unsupported (this build reads version {expected})")]
    VersionUnsupported { found: u32, expected: u32 },
    #[error("index integrity check failed: {0}")]
    Integrity(String),
    #[error("cannot combine indexes built with different normalization")]
    NormalizationMismatch,
}

impl CorpusError {
    /// The offending document, when the error is about a single document.
    pub fn doc_id(&self) -> Option<&str> {
        match self {
            CorpusError::Undecodable { doc_id, .. }
            | CorpusError::DuplicateId { doc_id }
            | CorpusError::TooLarge { doc_id, .. } => Some(doc_id),
            _ => None,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Reads every regular file under `root` as one document. The doc_id is the
/// path relative to `root`, with `/` separators. Files are visited in sorted
/// order so that identical trees produce identical indexes.
pub fn read_dir(
    root: &Path,
) -> Result<impl Iterator<Item = Result<Document, CorpusError>>, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        ));
    }
    let root = root.to_path_buf();
    let walker = walkdir::WalkDir::new(&root)
        .sort_by_file_name()
        .into_iter();
    Ok(walker.filter_map(move |entry| {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.clone());
                return Some(Err(CorpusError::Io {
                    path,
                    source: e.into(),
                }));
            }
        };
        if !entry.file_type().is_file() {
            return None;
        }
        let rel = entry.path().strip_prefix(&root).unwrap_or(entry.path());
        let doc_id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        Some(
            std::fs::read(entry.path())
                .map_err(|e| CorpusError::io(entry.path(), e))
                .and_then(|bytes| match String::from_utf8(bytes) {
                    Ok(content) => Ok(Document { doc_id, content }),
                    Err(e) => Err(CorpusError::Undecodable {
                        doc_id,
                        source: e.utf8_error(),
                    }),
                }),
        )
    }))
}

/// Reads a line-delimited JSON file of `{"doc_id": ..., "content": ...}`
/// records. Blank lines are skipped.
pub fn read_jsonl(
    path: &Path,
) -> Result<impl Iterator<Item = Result<Document, CorpusError>>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let path = path.to_path_buf();
    let mut reader = BufReader::new(file);
    let mut line_no = 0usize;
    let mut buf = Vec::new();
    Ok(std::iter::from_fn(move || loop {
        buf.clear();
        line_no += 1;
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => return None,
            Ok(_) => {}
            Err(e) => return Some(Err(CorpusError::io(&path, e))),
        }
        if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let line = match std::str::from_utf8(&buf) {
            Ok(l) => l,
            Err(source) => {
                return Some(Err(CorpusError::Undecodable {
                    doc_id: format!("{}:{line_no}", path.display()),
                    source,
                }))
            }
        };
        return Some(
            serde_json::from_str::<Document>(line).map_err(|e| CorpusError::Record {
                path: path.clone(),
                line: line_no,
                message: e.to_string(),
            }),
        );
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn directory_documents_are_sorted_with_relative_ids() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("b.txt"), "bee").unwrap();
        std::fs::write(dir.path().join("a.txt"), "ay").unwrap();
        std::fs::write(dir.path().join("sub/c.txt"), "sea").unwrap();
        let docs: Vec<_> = read_dir(dir.path()).unwrap().map(Result::unwrap).collect();
        let ids: Vec<_> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a.txt", "b.txt", "sub/c.txt"]);
        assert_eq!(docs[2].content, "sea");
    }

    #[test]
    fn undecodable_file_names_its_doc_id() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.bin"), [0x61, 0xFF, 0x62]).unwrap();
        let err = read_dir(dir.path()).unwrap().next().unwrap().unwrap_err();
        assert_eq!(err.doc_id(), Some("bad.bin"));
        assert!(matches!(err, CorpusError::Undecodable { .. }));
    }

    #[test]
    fn jsonl_documents_and_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"doc_id":"d1","content":"hello world"}}"#).unwrap();
        writeln!(f).unwrap();
        writeln!(f, r#"{{"doc_id":"d2"}}"#).unwrap();
        drop(f);
        let items: Vec<_> = read_jsonl(&path).unwrap().collect();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].as_ref().unwrap(), &Document::new("d1", "hello world"));
        match &items[1] {
            Err(CorpusError::Record { line, message, .. }) => {
                assert_eq!(*line, 3);
                assert!(message.contains("content"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
