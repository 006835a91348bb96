//! Sharded JSONL corpora.
//!
//! A corpus is a directory of numbered JSONL shards plus `manifest.json`.
//! Each line holds one object with a required `"text"` and optional `"id"`
//! and `"source"`. Reading yields documents in shard order, then line order;
//! a bad line becomes a per-record error and the stream keeps going.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::Xxh3;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip)]
    pub n_bytes: usize,
}

impl Document {
    /// Builds a document, enforcing the non-blank text invariant.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source: Option<String>,
    ) -> Result<Self, RecordErrorKind> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(RecordErrorKind::EmptyText);
        }
        Ok(Self {
            id: id.into(),
            n_bytes: text.len(),
            text,
            source,
        })
    }

    /// 64-bit hash of the document text, used for cache keys.
    pub fn content_hash(&self) -> u64 {
        xxhash_rust::xxh3::xxh3_64(self.text.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordErrorKind {
    #[error("empty-text")]
    EmptyText,
    #[error("encoding")]
    Encoding,
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("duplicate-id: {0}")]
    DuplicateId(String),
}

impl RecordErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyText => "empty-text",
            Self::Encoding => "encoding",
            Self::Malformed(_) => "malformed",
            Self::DuplicateId(_) => "duplicate-id",
        }
    }
}

/// A rejected input line, located by shard path and 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}:{line}: {kind}", shard.display())]
pub struct RecordError {
    pub shard: PathBuf,
    pub line: usize,
    pub kind: RecordErrorKind,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("duplicate-id: {0}")]
    DuplicateId(String),
    #[error("shard_size must be at least 1")]
    InvalidShardSize,
    #[error("id-not-in-corpus: {0}")]
    IdNotInCorpus(String),
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

/// Parses and validates one JSONL line. A missing or empty id is synthesized
/// as `<shard-stem>:<line>` so score caches stay joinable.
pub fn validate_record(
    line: &[u8],
    shard_stem: &str,
    line_no: usize,
) -> Result<Document, RecordErrorKind> {
    let line = std::str::from_utf8(line).map_err(|_| RecordErrorKind::Encoding)?;
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| RecordErrorKind::Malformed(e.to_string()))?;
    let text = raw.text.ok_or(RecordErrorKind::EmptyText)?;
    let id = match raw.id {
        Some(id) if !id.is_empty() => id,
        _ => format!("{shard_stem}:{line_no}"),
    };
    Document::new(id, text, raw.source)
}

pub fn shard_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Fatal(#[from] CorpusError),
}

/// Streaming reader over an ordered list of shards. Yields `Ok(Document)`,
/// `Err(ReadError::Record)` for a rejected line, or a single
/// `Err(ReadError::Fatal)` after which the stream ends.
pub struct CorpusReader {
    shards: std::vec::IntoIter<PathBuf>,
    current: Option<(PathBuf, String, BufReader<File>)>,
    line_no: usize,
    seen: HashSet<String>,
    buf: Vec<u8>,
    done: bool,
}

pub fn read_corpus<P: AsRef<Path>>(shard_paths: &[P]) -> CorpusReader {
    CorpusReader {
        shards: shard_paths
            .iter()
            .map(|p| p.as_ref().to_path_buf())
            .collect::<Vec<_>>()
            .into_iter(),
        current: None,
        line_no: 0,
        seen: HashSet::new(),
        buf: Vec::new(),
        done: false,
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Document, ReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            if self.current.is_none() {
                let path = self.shards.next()?;
                match File::open(&path) {
                    Ok(f) => {
                        let stem = shard_stem(&path);
                        self.current = Some((path, stem, BufReader::new(f)));
                        self.line_no = 0;
                    }
                    Err(e) => {
                        self.done = true;
                        return Some(Err(CorpusError::io(&path, e).into()));
                    }
                }
            }
            let (path, stem, reader) = self.current.as_mut().expect("open shard");
            self.buf.clear();
            match reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.current = None;
                    continue;
                }
                Ok(_) => {
                    self.line_no += 1;
                    let mut line: &[u8] = &self.buf;
                    if let Some(rest) = line.strip_suffix(b"\n") {
                        line = rest;
                    }
                    if let Some(rest) = line.strip_suffix(b"\r") {
                        line = rest;
                    }
                    let result = validate_record(line, stem, self.line_no).and_then(|doc| {
                        if self.seen.insert(doc.id.clone()) {
                            Ok(doc)
                        } else {
                            Err(RecordErrorKind::DuplicateId(doc.id))
                        }
                    });
                    return Some(result.map_err(|kind| {
                        RecordError {
                            shard: path.clone(),
                            line: self.line_no,
                            kind,
                        }
                        .into()
                    }));
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::io(path, e).into()));
                }
            }
        }
    }
}

/// Documents and per-record errors gathered from a whole corpus.
#[derive(Debug, Default)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub errors: Vec<RecordError>,
}

impl LoadedCorpus {
    pub fn lines(&self) -> usize {
        self.documents.len() + self.errors.len()
    }
}

type ShardLines = Vec<(usize, Result<Document, RecordError>)>;

fn read_shard(path: &Path) -> Result<ShardLines, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let stem = shard_stem(path);
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).split(b'\n').enumerate() {
        let mut line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        let record = validate_record(&line, &stem, i + 1).map_err(|kind| RecordError {
            shard: path.to_path_buf(),
            line: i + 1,
            kind,
        });
        out.push((i + 1, record));
    }
    Ok(out)
}

/// Reads all shards with up to `workers` threads and merges by shard index
/// then line number, so the result equals the sequential [`read_corpus`].
pub fn load_corpus<P: AsRef<Path> + Sync>(
    shard_paths: &[P],
    workers: usize,
) -> Result<LoadedCorpus, CorpusError> {
    let read = || {
        shard_paths
            .par_iter()
            .map(|p| read_shard(p.as_ref()))
            .collect::<Result<Vec<_>, _>>()
    };
    let per_shard = with_pool(workers, read)?;
    let mut loaded = LoadedCorpus::default();
    let mut seen = HashSet::new();
    for (shard, records) in shard_paths.iter().zip(per_shard) {
        for (line, record) in records {
            match record {
                Ok(doc) if !seen.insert(doc.id.clone()) => loaded.errors.push(RecordError {
                    shard: shard.as_ref().to_path_buf(),
                    line,
                    kind: RecordErrorKind::DuplicateId(doc.id),
                }),
                Ok(doc) => loaded.documents.push(doc),
                Err(e) => loaded.errors.push(e),
            }
        }
    }
    Ok(loaded)
}

/// Runs `f` inside a rayon pool of `workers` threads (0 means rayon's default).
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_id: String,
    /// Shard file names relative to the manifest directory, lexicographic.
    pub shard_paths: Vec<PathBuf>,
    pub shard_doc_counts: Vec<usize>,
    pub doc_count: usize,
    pub total_bytes: usize,
    pub created_at: DateTime<Utc>,
}

impl CorpusManifest {
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
        let manifest: Self = serde_json::from_str(&text).map_err(|e| CorpusError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if manifest.shard_doc_counts.iter().sum::<usize>() != manifest.doc_count
            || manifest.shard_doc_counts.len() != manifest.shard_paths.len()
        {
            return Err(CorpusError::Manifest {
                path,
                message: "doc_count does not match shard counts".into(),
            });
        }
        Ok(manifest)
    }

    pub fn resolved_shards(&self, dir: &Path) -> Vec<PathBuf> {
        self.shard_paths.iter().map(|p| dir.join(p)).collect()
    }
}

/// Shard paths of a corpus directory: from `manifest.json` when present,
/// otherwise every `*.jsonl` file in lexicographic order. A plain file path
/// is treated as a single shard.
pub fn corpus_shards(path: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if path.join(MANIFEST_FILE).exists() {
        return Ok(CorpusManifest::load(path)?.resolved_shards(path));
    }
    let mut shards = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| CorpusError::io(path, e))? {
        let entry = entry.map_err(|e| CorpusError::io(path, e))?;
        let p = entry.path();
        if p.extension().is_some_and(|e| e == "jsonl") {
            shards.push(p);
        }
    }
    shards.sort();
    Ok(shards)
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
}

pub fn shard_name(index: usize) -> String {
    format!("shard-{index:05}.jsonl")
}

/// Writes numbered shards of at most `shard_size` documents plus
/// `manifest.json`. Output bytes depend only on the input sequence; stale
/// shards from an earlier run in `out_dir` are removed.
pub fn write_corpus<I>(
    docs: I,
    out_dir: &Path,
    shard_size: usize,
    corpus_id: &str,
) -> Result<CorpusManifest, CorpusError>
where
    I: IntoIterator<Item = Document>,
{
    if shard_size == 0 {
        return Err(CorpusError::InvalidShardSize);
    }
    fs::create_dir_all(out_dir).map_err(|e| CorpusError::io(out_dir, e))?;
    remove_stale_shards(out_dir)?;

    let mut seen = HashSet::new();
    let mut shard_paths = Vec::new();
    let mut shard_doc_counts = Vec::new();
    let mut total_bytes = 0usize;
    let mut writer: Option<(PathBuf, BufWriter<File>)> = None;
    let mut in_shard = 0usize;

    for doc in docs {
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        if writer.is_none() || in_shard == shard_size {
            if let Some((path, w)) = writer.take() {
                finish(&path, w)?;
                shard_doc_counts.push(in_shard);
            }
            let name = shard_name(shard_paths.len());
            let path = out_dir.join(&name);
            let file = File::create(&path).map_err(|e| CorpusError::io(&path, e))?;
            writer = Some((path, BufWriter::new(file)));
            shard_paths.push(PathBuf::from(name));
            in_shard = 0;
        }
        let (path, w) = writer.as_mut().expect("open writer");
        let record = OutRecord {
            id: &doc.id,
            text: &doc.text,
            source: doc.source.as_deref(),
        };
        serde_json::to_writer(&mut *w, &record)
            .map_err(|e| CorpusError::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
        total_bytes += doc.text.len();
        in_shard += 1;
    }
    if let Some((path, w)) = writer.take() {
        finish(&path, w)?;
        shard_doc_counts.push(in_shard);
    }

    let manifest = CorpusManifest {
        corpus_id: corpus_id.to_string(),
        doc_count: shard_doc_counts.iter().sum(),
        shard_paths,
        shard_doc_counts,
        total_bytes,
        created_at: Utc::now(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| CorpusError::io(&path, e))?;
    Ok(manifest)
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), CorpusError> {
    w.flush().map_err(|e| CorpusError::io(path, e))
}

fn remove_stale_shards(dir: &Path) -> Result<(), CorpusError> {
    for entry in fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))? {
        let p = entry.map_err(|e| CorpusError::io(dir, e))?.path();
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned());
        if let Some(name) = name {
            if name.starts_with("shard-") && name.ends_with(".jsonl") {
                fs::remove_file(&p).map_err(|e| CorpusError::io(&p, e))?;
            }
        }
    }
    Ok(())
}

/// Order-sensitive fingerprint of a document sequence (ids and texts).
pub fn corpus_fingerprint<'a, I: IntoIterator<Item = &'a Document>>(docs: I) -> String {
    let mut h = Xxh3::new();
    for d in docs {
        h.update(&(d.id.len() as u64).to_le_bytes());
        h.update(d.id.as_bytes());
        h.update(&(d.text.len() as u64).to_le_bytes());
        h.update(d.text.as_bytes());
    }
    format!("{:016x}", h.digest())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(path: &Path, lines: &[&str]) {
        fs::write(path, lines.join("\n") + "\n").unwrap();
    }

    #[test]
    fn validate_counts_bytes() {
        let d = validate_record(br#"{"id":"a","text":"hello"}"#, "s0", 1).unwrap();
        assert_eq!(d.id, "a");
        assert_eq!(d.n_bytes, 5);
        let d = validate_record(r#"{"id":"u","text":"é"}"#.as_bytes(), "s0", 1).unwrap();
        assert_eq!(d.n_bytes, 2);
    }

    #[test]
    fn validate_synthesizes_missing_id() {
        let d = validate_record(br#"{"text":"hi"}"#, "s0", 7).unwrap();
        assert_eq!(d.id, "s0:7");
    }

    #[test]
    fn validate_rejects_blank_and_bad_bytes() {
        let e = validate_record(br#"{"id":"b","text":"   "}"#, "s0", 1).unwrap_err();
        assert_eq!(e.code(), "empty-text");
        let e = validate_record(br#"{"id":"b"}"#, "s0", 1).unwrap_err();
        assert_eq!(e.code(), "empty-text");
        let e = validate_record(b"{\"text\":\"\xff\xfe\"}", "s0", 1).unwrap_err();
        assert_eq!(e.code(), "encoding");
        let e = validate_record(b"not json", "s0", 1).unwrap_err();
        assert_eq!(e.code(), "malformed");
    }

    #[test]
    fn reads_shards_in_file_then_line_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        write_lines(&a, &[r#"{"text":"1"}"#, r#"{"text":"2"}"#, r#"{"text":"3"}"#]);
        write_lines(&b, &[r#"{"text":"4"}"#, r#"{"text":"5"}"#]);
        let texts: Vec<String> = read_corpus(&[&a, &b]).map(|d| d.unwrap().text).collect();
        assert_eq!(texts, ["1", "2", "3", "4", "5"]);
    }

    #[test]
    fn bad_record_is_reported_and_stream_continues() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("s0.jsonl");
        write_lines(
            &a,
            &[r#"{"id":"x","text":"ok"}"#, r#"{"id":"y","text":""}"#, r#"{"text":"z"}"#],
        );
        let items: Vec<_> = read_corpus(&[&a]).collect();
        assert_eq!(items.len(), 3);
        match &items[1] {
            Err(ReadError::Record(e)) => {
                assert_eq!(e.line, 2);
                assert_eq!(e.kind, RecordErrorKind::EmptyText);
                assert_eq!(e.shard, a);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(items[2].as_ref().unwrap().id, "s0:3");
    }

    #[test]
    fn missing_shard_is_fatal() {
        let items: Vec<_> = read_corpus(&[Path::new("/nonexistent/x.jsonl")]).collect();
        assert_eq!(items.len(), 1);
        assert!(matches!(items[0], Err(ReadError::Fatal(CorpusError::Io { .. }))));
    }

    #[test]
    fn duplicate_ids_are_record_errors() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        write_lines(&a, &[r#"{"id":"x","text":"1"}"#, r#"{"id":"x","text":"2"}"#]);
        let loaded = load_corpus(&[&a], 2).unwrap();
        assert_eq!(loaded.documents.len(), 1);
        assert_eq!(loaded.errors.len(), 1);
        assert_eq!(loaded.errors[0].line, 2);
    }

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document::new(format!("d{i}"), format!("text {i}"), None).unwrap())
            .collect()
    }

    #[test]
    fn write_uses_ceiling_shards() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(docs(5), dir.path(), 2, "c").unwrap();
        assert_eq!(m.shard_doc_counts, vec![2, 2, 1]);
        assert_eq!(m.doc_count, 5);
        assert_eq!(m.shard_paths.len(), 3);
        assert_eq!(CorpusManifest::load(dir.path()).unwrap().doc_count, 5);
    }

    #[test]
    fn write_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(Vec::new(), dir.path(), 2, "c").unwrap();
        assert!(m.shard_paths.is_empty());
        assert_eq!(m.doc_count, 0);
    }

    #[test]
    fn rewrite_is_identical_apart_from_timestamp() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut m1 = write_corpus(docs(10), dir1.path(), 3, "c").unwrap();
        let m2 = write_corpus(docs(10), dir2.path(), 3, "c").unwrap();
        m1.created_at = m2.created_at;
        assert_eq!(m1, m2);
        for p in &m1.shard_paths {
            assert_eq!(
                fs::read(dir1.path().join(p)).unwrap(),
                fs::read(dir2.path().join(p)).unwrap()
            );
        }
    }

    #[test]
    fn write_rejects_duplicates_and_zero_shard_size() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = docs(2);
        d[1].id = d[0].id.clone();
        assert!(matches!(
            write_corpus(d, dir.path(), 2, "c"),
            Err(CorpusError::DuplicateId(_))
        ));
        assert!(matches!(
            write_corpus(docs(1), dir.path(), 0, "c"),
            Err(CorpusError::InvalidShardSize)
        ));
    }

    #[test]
    fn stale_shards_are_replaced() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(docs(10), dir.path(), 2, "c").unwrap();
        write_corpus(docs(3), dir.path(), 2, "c").unwrap();
        let shards = corpus_shards(dir.path()).unwrap();
        assert_eq!(shards.len(), 2);
        let n = read_corpus(&shards).count();
        assert_eq!(n, 3);
    }
}
