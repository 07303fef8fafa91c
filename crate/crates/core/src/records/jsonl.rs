use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Keyed, RecordError, TextRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Stop at the first malformed line.
    #[default]
    Strict,
    /// Report malformed lines and keep reading.
    Lenient,
}

/// Streams records from a line-delimited JSON file, checking ids for
/// uniqueness. Blank lines are skipped. Items carry their 1-based line number.
pub struct RecordReader<T> {
    path: PathBuf,
    reader: BufReader<File>,
    line: usize,
    buf: String,
    seen: HashMap<String, usize>,
    _marker: PhantomData<T>,
}

pub fn read_jsonl<T: DeserializeOwned + Keyed>(path: &Path) -> Result<RecordReader<T>, RecordError> {
    let file = File::open(path).map_err(|source| RecordError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(RecordReader {
        path: path.to_path_buf(),
        reader: BufReader::new(file),
        line: 0,
        buf: String::new(),
        seen: HashMap::new(),
        _marker: PhantomData,
    })
}

pub fn read_records(path: &Path) -> Result<RecordReader<TextRecord>, RecordError> {
    read_jsonl(path)
}

impl<T: DeserializeOwned + Keyed> Iterator for RecordReader<T> {
    type Item = Result<(usize, T), RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            let line = self.line;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(source) => {
                    return Some(Err(RecordError::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
            }
            if self.buf.trim().is_empty() {
                continue;
            }
            let record: T = match serde_json::from_str(&self.buf) {
                Ok(r) => r,
                Err(e) => {
                    return Some(Err(RecordError::Parse {
                        line,
                        message: e.to_string(),
                    }))
                }
            };
            if let Err(message) = record.validate() {
                return Some(Err(RecordError::Invalid {
                    line,
                    record_id: record.key().to_string(),
                    message,
                }));
            }
            if let Some(&first_line) = self.seen.get(record.key()) {
                return Some(Err(RecordError::DuplicateId {
                    line,
                    record_id: record.key().to_string(),
                    first_line,
                }));
            }
            self.seen.insert(record.key().to_string(), line);
            return Some(Ok((line, record)));
        }
    }
}

#[derive(Debug)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    /// Malformed lines; always empty in strict mode.
    pub errors: Vec<RecordError>,
}

/// Reads a whole file. I/O errors are always fatal; malformed lines are fatal
/// only in strict mode.
pub fn read_all<T: DeserializeOwned + Keyed>(
    path: &Path,
    mode: ReadMode,
) -> Result<ReadOutcome<T>, RecordError> {
    let mut outcome = ReadOutcome {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for item in read_jsonl::<T>(path)? {
        match item {
            Ok((_, r)) => outcome.records.push(r),
            Err(e @ RecordError::Io { .. }) => return Err(e),
            Err(e) if mode == ReadMode::Strict => return Err(e),
            Err(e) => outcome.errors.push(e),
        }
    }
    Ok(outcome)
}

/// Buffered line-delimited JSON writer.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(JsonlWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn write_all<'a, T: Serialize + 'a>(
        &mut self,
        records: impl IntoIterator<Item = &'a T>,
    ) -> std::io::Result<()> {
        records.into_iter().try_for_each(|r| self.write(r))
    }

    /// Flushes buffered lines so that a crash loses nothing written so far.
    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn finish(self) -> std::io::Result<PathBuf> {
        let file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        Ok(self.path)
    }
}
