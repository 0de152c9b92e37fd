//! The evidence database: unique evidence spans mapped to the papers they
//! cite, with support counts, plus the corpus statistics BM25 needs.
//!
//! On disk the database is a line-delimited text file:
//!
//! ```text
//! ILCDB1
//! {"version":1,"papers":2,"records":3,"checksum":"<sha256 of everything below>"}
//! {"paper":{...}}
//! {"record":{...}}
//! {"stats":{...}}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DbError;
use crate::span::{Provenance, SpanRecord};
use crate::text::{normalize_key, tokenize};

pub const MAGIC: &str = "ILCDB1";
pub const FORMAT_VERSION: u32 = 1;

/// Year 0 stands for "unknown".
pub const UNKNOWN_YEAR: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperMetadata {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, deserialize_with = "year_or_unknown")]
    pub year: u32,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub authors: Vec<String>,
}

fn year_or_unknown<'de, D: serde::Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
    Ok(Option::<u32>::deserialize(d)?.unwrap_or(UNKNOWN_YEAR))
}

impl PaperMetadata {
    pub fn new(paper_id: impl Into<String>, title: impl Into<String>, year: u32) -> Self {
        PaperMetadata { paper_id: paper_id.into(), title: title.into(), year, venue: String::new(), authors: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub paper_id: String,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub span_id: usize,
    /// Normalized lookup key; unique across the database.
    pub key: String,
    /// Surface form shown to users.
    pub text: String,
    /// Sorted by paper id.
    pub citations: Vec<Citation>,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
}

impl EvidenceRecord {
    pub fn cites(&self, paper_id: &str) -> bool {
        self.citations.iter().any(|c| c.paper_id == paper_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub doc_count: usize,
    pub avg_span_tokens: f64,
    /// Number of spans containing each token.
    pub doc_freq: BTreeMap<String, usize>,
    /// Token length of each span, indexed by span id.
    pub span_lengths: Vec<usize>,
}

impl IndexStats {
    fn compute(records: &[EvidenceRecord]) -> Self {
        let mut doc_freq = BTreeMap::new();
        let mut span_lengths = Vec::with_capacity(records.len());
        for r in records {
            let tokens = tokenize(&r.text);
            span_lengths.push(tokens.len());
            let unique: BTreeSet<String> = tokens.into_iter().collect();
            for t in unique {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
        let total: usize = span_lengths.iter().sum();
        let avg_span_tokens = if records.is_empty() { 0.0 } else { total as f64 / records.len() as f64 };
        IndexStats { doc_count: records.len(), avg_span_tokens, doc_freq, span_lengths }
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub input_spans: usize,
    pub dropped_citations: usize,
    /// Spans with no tokens, or whose citations were all dropped.
    pub skipped_spans: usize,
    pub unique_spans: usize,
    pub cited_papers: usize,
    pub dropped_paper_ids: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct EvidenceDatabase {
    papers: BTreeMap<String, PaperMetadata>,
    records: Vec<EvidenceRecord>,
    stats: IndexStats,
    by_key: HashMap<String, usize>,
}

impl PartialEq for EvidenceDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.papers == other.papers && self.records == other.records && self.stats == other.stats
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    papers: usize,
    records: usize,
    checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Entry {
    Paper(PaperMetadata),
    Record(EvidenceRecord),
    Stats(IndexStats),
}

#[derive(Default)]
struct Pending {
    surface: Option<String>,
    citations: BTreeMap<String, u64>,
    provenance: BTreeSet<Provenance>,
}

impl EvidenceDatabase {
    pub fn empty() -> Self {
        Self::from_parts(BTreeMap::new(), Vec::new())
    }

    fn from_parts(papers: BTreeMap<String, PaperMetadata>, records: Vec<EvidenceRecord>) -> Self {
        let stats = IndexStats::compute(&records);
        let by_key = records.iter().map(|r| (r.key.clone(), r.span_id)).collect();
        EvidenceDatabase { papers, records, stats, by_key }
    }

    /// Conflates exact-match spans and counts support per cited paper.
    ///
    /// Citations to papers missing from `papers` are dropped and counted.
    /// The result does not depend on the order of `extracted`: span ids
    /// follow the sorted span keys, and the displayed surface form is the
    /// smallest one observed.
    pub fn build<I, P>(extracted: I, papers: P) -> (Self, BuildReport)
    where
        I: IntoIterator<Item = SpanRecord>,
        P: IntoIterator<Item = PaperMetadata>,
    {
        let papers: BTreeMap<String, PaperMetadata> = papers.into_iter().map(|p| (p.paper_id.clone(), p)).collect();
        let mut report = BuildReport::default();
        let mut pending: BTreeMap<String, Pending> = BTreeMap::new();

        for rec in extracted {
            report.input_spans += 1;
            let key = normalize_key(&rec.span_text);
            if tokenize(&key).is_empty() {
                report.skipped_spans += 1;
                continue;
            }
            let mut resolved = Vec::new();
            for id in &rec.cited_paper_ids {
                if papers.contains_key(id) {
                    resolved.push(id.clone());
                } else {
                    report.dropped_citations += 1;
                    report.dropped_paper_ids.insert(id.clone());
                }
            }
            if resolved.is_empty() {
                report.skipped_spans += 1;
                continue;
            }
            let entry = pending.entry(key).or_default();
            let surface = rec.span_text.split_whitespace().collect::<Vec<_>>().join(" ");
            if entry.surface.as_ref().is_none_or(|s| surface < *s) {
                entry.surface = Some(surface);
            }
            for id in resolved {
                *entry.citations.entry(id).or_insert(0) += 1;
            }
            if let Some(p) = rec.provenance {
                entry.provenance.insert(p);
            }
        }

        let records: Vec<EvidenceRecord> = pending
            .into_iter()
            .enumerate()
            .map(|(span_id, (key, p))| EvidenceRecord {
                span_id,
                key,
                text: p.surface.unwrap_or_default(),
                citations: p.citations.into_iter().map(|(paper_id, support)| Citation { paper_id, support }).collect(),
                provenance: p.provenance.into_iter().collect(),
            })
            .collect();
        let db = Self::from_parts(papers, records);
        report.unique_spans = db.records.len();
        report.cited_papers = db.cited_papers().len();
        (db, report)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EvidenceRecord] {
        &self.records
    }

    pub fn record(&self, span_id: usize) -> Option<&EvidenceRecord> {
        self.records.get(span_id)
    }

    pub fn stats(&self) -> &IndexStats {
        &self.stats
    }

    pub fn papers(&self) -> &BTreeMap<String, PaperMetadata> {
        &self.papers
    }

    pub fn paper(&self, paper_id: &str) -> Option<&PaperMetadata> {
        self.papers.get(paper_id)
    }

    /// Exact match on the normalized span text.
    pub fn lookup(&self, span_text: &str) -> Option<&EvidenceRecord> {
        self.by_key.get(&normalize_key(span_text)).map(|&i| &self.records[i])
    }

    /// Every paper cited by at least one record.
    pub fn cited_papers(&self) -> BTreeSet<&str> {
        self.records.iter().flat_map(|r| r.citations.iter().map(|c| c.paper_id.as_str())).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::new();
        let mut line = |e: &Entry| {
            serde_json::to_writer(&mut body, e).expect("in-memory serialization");
            body.push(b'\n');
        };
        for p in self.papers.values() {
            line(&Entry::Paper(p.clone()));
        }
        for r in &self.records {
            line(&Entry::Record(r.clone()));
        }
        line(&Entry::Stats(self.stats.clone()));

        let header = Header {
            version: FORMAT_VERSION,
            papers: self.papers.len(),
            records: self.records.len(),
            checksum: hex::encode(Sha256::digest(&body)),
        };
        let mut out = Vec::with_capacity(body.len() + 128);
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(b'\n');
        serde_json::to_writer(&mut out, &header).expect("in-memory serialization");
        out.push(b'\n');
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DbError> {
        let (magic, rest) = split_line(bytes).ok_or(DbError::BadMagic)?;
        if magic != MAGIC.as_bytes() {
            return Err(DbError::BadMagic);
        }
        let (header_line, body) =
            split_line(rest).ok_or_else(|| DbError::Malformed { line: 2, reason: "missing header".into() })?;
        let header: Header = serde_json::from_slice(header_line)
            .map_err(|e| DbError::Malformed { line: 2, reason: e.to_string() })?;
        if header.version != FORMAT_VERSION {
            return Err(DbError::VersionMismatch { found: header.version, expected: FORMAT_VERSION });
        }
        let actual = hex::encode(Sha256::digest(body));
        if actual != header.checksum {
            return Err(DbError::ChecksumMismatch { expected: header.checksum, actual });
        }

        let mut papers = BTreeMap::new();
        let mut records = Vec::with_capacity(header.records);
        let mut stats = None;
        for (i, line) in body.split(|&b| b == b'\n').enumerate() {
            let lineno = i + 3;
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: String| DbError::Malformed { line: lineno, reason };
            match serde_json::from_slice(line).map_err(|e| malformed(e.to_string()))? {
                Entry::Paper(p) => {
                    if papers.insert(p.paper_id.clone(), p).is_some() {
                        return Err(malformed("duplicate paper id".into()));
                    }
                }
                Entry::Record(r) => {
                    if r.span_id != records.len() {
                        return Err(malformed(format!("span id {} out of sequence", r.span_id)));
                    }
                    records.push(r);
                }
                Entry::Stats(s) => stats = Some(s),
            }
        }
        if papers.len() != header.papers || records.len() != header.records {
            return Err(DbError::Malformed { line: 2, reason: "entry counts disagree with header".into() });
        }
        let stored = stats.ok_or_else(|| DbError::Malformed { line: 0, reason: "missing stats".into() })?;
        let db = Self::from_parts(papers, records);
        if db.by_key.len() != db.records.len() {
            return Err(DbError::Malformed { line: 0, reason: "duplicate span keys".into() });
        }
        if db.stats != stored {
            return Err(DbError::Malformed { line: 0, reason: "stored stats disagree with records".into() });
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DbError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let nl = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..nl], &bytes[nl + 1..]))
}
