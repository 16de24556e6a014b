//! Plain-text corpus ingestion and a persistent, paragraph-aware document
//! store.
//!
//! Store file layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "OQASTOR1"
//! records  repeated until EOF:
//!   id_len    u32, then id bytes (UTF-8)
//!   title_len u32, then title bytes
//!   text_len  u64, then text bytes
//! ```
//!
//! The store is append-only during ingest and immutable afterwards; the
//! id-to-offset index is rebuilt by scanning on open.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STORE_MAGIC: &[u8; 8] = b"OQASTOR1";

/// One document: full plain text plus paragraphs derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
}

impl Document {
    /// Paragraphs of `text` under the store's split rule.
    pub fn paragraphs(&self) -> Vec<String> {
        split_paragraphs(&self.text)
    }
}

/// Split on one-or-more blank lines (a blank line trims to empty), trim each
/// paragraph, drop empties. Order preserved.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            flush_paragraph(&mut current, &mut paragraphs);
        } else {
            current.push(line);
        }
    }
    flush_paragraph(&mut current, &mut paragraphs);
    paragraphs
}

fn flush_paragraph(lines: &mut Vec<&str>, out: &mut Vec<String>) {
    if lines.is_empty() {
        return;
    }
    let joined = lines.join("\n");
    let trimmed = joined.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    lines.clear();
}

/// Line-delimited JSON corpus record. Unknown fields are ignored.
#[derive(Debug, Deserialize)]
struct CorpusRecord {
    id: String,
    title: String,
    text: String,
}

/// Outcome of one ingest run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    /// Documents written to the store.
    pub count: usize,
    /// Records rejected because their id was already present.
    pub duplicates: usize,
    /// Records rejected because their text trimmed to empty.
    pub empty_rejected: usize,
    /// Malformed lines: (1-based line number, message).
    pub errors: Vec<(usize, String)>,
}

/// Persistent corpus keyed by document id.
pub struct DocStore {
    path: PathBuf,
    file: File,
    /// id -> (record payload offset, lengths) in insertion order index.
    index: HashMap<String, RecordLoc>,
    order: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct RecordLoc {
    offset: u64,
    id_len: u32,
    title_len: u32,
    text_len: u64,
}

impl DocStore {
    /// Create an empty store file, truncating any existing one.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::options()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.write_all(STORE_MAGIC).map_err(|e| Error::io(&path, e))?;
        file.flush().map_err(|e| Error::io(&path, e))?;
        Ok(DocStore {
            path,
            file,
            index: HashMap::new(),
            order: Vec::new(),
        })
    }

    /// Open an existing store and rebuild the id index by scanning.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::options()
            .read(true)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut reader = BufReader::new(&file);
        let mut magic = [0u8; 8];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::format(&path, "file too short for magic header"))?;
        if &magic != STORE_MAGIC {
            return Err(Error::format(&path, "bad magic; not a document store"));
        }

        let mut index = HashMap::new();
        let mut order = Vec::new();
        let mut offset = 8u64;
        loop {
            let mut len4 = [0u8; 4];
            match reader.read_exact(&mut len4) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(Error::io(&path, e)),
            }
            let id_len = u32::from_le_bytes(len4);
            let mut id_buf = vec![0u8; id_len as usize];
            reader.read_exact(&mut id_buf).map_err(|e| Error::io(&path, e))?;
            reader.read_exact(&mut len4).map_err(|e| Error::io(&path, e))?;
            let title_len = u32::from_le_bytes(len4);
            let mut len8 = [0u8; 8];
            skip(&mut reader, title_len as u64, &path)?;
            reader.read_exact(&mut len8).map_err(|e| Error::io(&path, e))?;
            let text_len = u64::from_le_bytes(len8);
            skip(&mut reader, text_len, &path)?;

            let id = String::from_utf8(id_buf)
                .map_err(|_| Error::format(&path, "document id is not UTF-8"))?;
            let loc = RecordLoc {
                offset,
                id_len,
                title_len,
                text_len,
            };
            if index.insert(id.clone(), loc).is_some() {
                return Err(Error::Store(format!("duplicate id {id:?} in store file")));
            }
            order.push(id);
            offset += 4 + id_len as u64 + 4 + title_len as u64 + 8 + text_len;
        }
        Ok(DocStore {
            path,
            file,
            index,
            order,
        })
    }

    /// Append one document. Duplicate ids are rejected.
    pub fn add(&mut self, doc: &Document) -> Result<()> {
        if self.index.contains_key(&doc.id) {
            return Err(Error::Store(format!("duplicate id {:?}", doc.id)));
        }
        let offset = self
            .file
            .seek(SeekFrom::End(0))
            .map_err(|e| Error::io(&self.path, e))?;
        let mut w = BufWriter::new(&self.file);
        w.write_all(&(doc.id.len() as u32).to_le_bytes())
            .and_then(|_| w.write_all(doc.id.as_bytes()))
            .and_then(|_| w.write_all(&(doc.title.len() as u32).to_le_bytes()))
            .and_then(|_| w.write_all(doc.title.as_bytes()))
            .and_then(|_| w.write_all(&(doc.text.len() as u64).to_le_bytes()))
            .and_then(|_| w.write_all(doc.text.as_bytes()))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        self.index.insert(
            doc.id.clone(),
            RecordLoc {
                offset,
                id_len: doc.id.len() as u32,
                title_len: doc.title.len() as u32,
                text_len: doc.text.len() as u64,
            },
        );
        self.order.push(doc.id.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Document ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.order
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Fetch a document by id.
    pub fn get(&self, id: &str) -> Result<Option<Document>> {
        let Some(loc) = self.index.get(id) else {
            return Ok(None);
        };
        Ok(Some(self.read_record(*loc)?))
    }

    /// Iterate documents in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = Result<Document>> + '_ {
        self.order.iter().map(move |id| {
            let loc = self.index[id];
            self.read_record(loc)
        })
    }

    fn read_record(&self, loc: RecordLoc) -> Result<Document> {
        use std::os::unix::fs::FileExt;
        let total = 4 + loc.id_len as usize + 4 + loc.title_len as usize + 8 + loc.text_len as usize;
        let mut buf = vec![0u8; total];
        self.file
            .read_exact_at(&mut buf, loc.offset)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut pos = 4usize;
        let id = std::str::from_utf8(&buf[pos..pos + loc.id_len as usize])
            .map_err(|_| Error::format(&self.path, "id is not UTF-8"))?
            .to_string();
        pos += loc.id_len as usize + 4;
        let title = std::str::from_utf8(&buf[pos..pos + loc.title_len as usize])
            .map_err(|_| Error::format(&self.path, "title is not UTF-8"))?
            .to_string();
        pos += loc.title_len as usize + 8;
        let text = std::str::from_utf8(&buf[pos..pos + loc.text_len as usize])
            .map_err(|_| Error::format(&self.path, "text is not UTF-8"))?
            .to_string();
        Ok(Document { id, title, text })
    }
}

fn skip<R: BufRead>(reader: &mut R, mut n: u64, path: &Path) -> Result<()> {
    while n > 0 {
        let available = reader
            .fill_buf()
            .map_err(|e| Error::io(path, e))?
            .len() as u64;
        if available == 0 {
            return Err(Error::format(path, "truncated record"));
        }
        let step = available.min(n);
        reader.consume(step as usize);
        n -= step;
    }
    Ok(())
}

/// Ingest a line-delimited JSON corpus file into `store`.
///
/// Malformed lines are reported with their line number and skipped; an
/// unreadable file is a fatal error. Records whose text trims to empty are
/// rejected.
pub fn ingest(corpus_file: impl AsRef<Path>, store: &mut DocStore) -> Result<IngestReport> {
    let path = corpus_file.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut report = IngestReport::default();

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.errors.push((line_no, e.to_string()));
                continue;
            }
        };
        if record.text.trim().is_empty() {
            report.empty_rejected += 1;
            continue;
        }
        if store.contains(&record.id) {
            report.duplicates += 1;
            continue;
        }
        store.add(&Document {
            id: record.id,
            title: record.title,
            text: record.text,
        })?;
        report.count += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_store() -> (tempfile::TempDir, DocStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = DocStore::create(dir.path().join("docs.store")).unwrap();
        (dir, store)
    }

    fn write_corpus(dir: &tempfile::TempDir, lines: &[&str]) -> PathBuf {
        let path = dir.path().join("corpus.jsonl");
        let mut f = File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn ingest_three_records() {
        let (dir, mut store) = temp_store();
        let corpus = write_corpus(
            &dir,
            &[
                r#"{"id":"d1","title":"One","text":"alpha"}"#,
                r#"{"id":"d2","title":"Two","text":"beta"}"#,
                r#"{"id":"d3","title":"Three","text":"gamma"}"#,
            ],
        );
        let report = ingest(&corpus, &mut store).unwrap();
        assert_eq!(report.count, 3);
        assert_eq!(report.duplicates, 0);
        assert_eq!(store.len(), 3);
    }

    #[test]
    fn ingest_rejects_duplicate_ids() {
        let (dir, mut store) = temp_store();
        let corpus = write_corpus(
            &dir,
            &[
                r#"{"id":"d1","title":"One","text":"alpha"}"#,
                r#"{"id":"d1","title":"Copy","text":"beta"}"#,
            ],
        );
        let report = ingest(&corpus, &mut store).unwrap();
        assert_eq!(report.count, 1);
        assert_eq!(report.duplicates, 1);
        // First record wins.
        assert_eq!(store.get("d1").unwrap().unwrap().text, "alpha");
    }

    #[test]
    fn ingest_empty_file() {
        let (dir, mut store) = temp_store();
        let corpus = write_corpus(&dir, &[]);
        let report = ingest(&corpus, &mut store).unwrap();
        assert_eq!(report.count, 0);
        assert!(store.is_empty());
        assert_eq!(store.get("anything").unwrap(), None);
    }

    #[test]
    fn ingest_reports_malformed_lines_and_continues() {
        let (dir, mut store) = temp_store();
        let corpus = write_corpus(
            &dir,
            &[
                r#"{"id":"d1","title":"One","text":"alpha"}"#,
                r#"{"id":"broken""#,
                r#"{"id":"d2","title":"Two","text":"beta","extra":42}"#,
            ],
        );
        let report = ingest(&corpus, &mut store).unwrap();
        assert_eq!(report.count, 2);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].0, 2);
    }

    #[test]
    fn ingest_rejects_empty_text() {
        let (dir, mut store) = temp_store();
        let corpus = write_corpus(&dir, &[r#"{"id":"d1","title":"One","text":"  \n "}"#]);
        let report = ingest(&corpus, &mut store).unwrap();
        assert_eq!(report.count, 0);
        assert_eq!(report.empty_rejected, 1);
    }

    #[test]
    fn ingest_unreadable_file_is_fatal() {
        let (_dir, mut store) = temp_store();
        assert!(ingest("/nonexistent/corpus.jsonl", &mut store).is_err());
    }

    #[test]
    fn reopen_round_trips_documents() {
        let dir = tempfile::tempdir().unwrap();
        let store_path = dir.path().join("docs.store");
        let text = "Paragraph one.\n\nParagraph two with ünïcode.";
        {
            let mut store = DocStore::create(&store_path).unwrap();
            store
                .add(&Document {
                    id: "d1".into(),
                    title: "Title".into(),
                    text: text.into(),
                })
                .unwrap();
        }
        let store = DocStore::open(&store_path).unwrap();
        assert_eq!(store.len(), 1);
        let doc = store.get("d1").unwrap().unwrap();
        assert_eq!(doc.text, text);
        assert_eq!(doc.title, "Title");
    }

    #[test]
    fn open_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.store");
        std::fs::write(&path, b"NOTASTORE").unwrap();
        assert!(DocStore::open(&path).is_err());
    }

    #[test]
    fn split_paragraphs_examples() {
        assert_eq!(split_paragraphs("A.\n\nB."), vec!["A.", "B."]);
        assert_eq!(split_paragraphs("A.\nB."), vec!["A.\nB."]);
        assert!(split_paragraphs("\n\n\n").is_empty());
        assert!(split_paragraphs("").is_empty());
        // Blank lines with spaces still split.
        assert_eq!(split_paragraphs("A.\n  \nB."), vec!["A.", "B."]);
    }

    #[test]
    fn split_paragraphs_idempotent_on_outputs() {
        let text = "First para\nsecond line.\n\n\nSecond para.\n \nThird.";
        for p in split_paragraphs(text) {
            assert_eq!(split_paragraphs(&p), vec![p.clone()]);
        }
    }
}
