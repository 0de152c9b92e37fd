//! Lexical pre-fetching: every span is scored with Okapi BM25 and BM25+,
//! and the candidates are the union of the two top-`cutoff` lists.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::db::{EvidenceDatabase, IndexStats};
use crate::text::tokenize;

pub const DEFAULT_CUTOFF: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Lower bound added to each BM25+ term.
    pub delta: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75, delta: 1.0 }
    }
}

impl Bm25Params {
    pub fn is_valid(&self) -> bool {
        self.k1 > 0.0 && (0.0..=1.0).contains(&self.b) && self.delta >= 0.0 && self.k1.is_finite() && self.delta.is_finite()
    }
}

/// `ln((|D| - n + 0.5) / (n + 0.5) + 1)` where `n` is the number of spans
/// containing `token`.
pub fn idf(stats: &IndexStats, token: &str) -> f64 {
    idf_from_counts(stats.doc_count, stats.doc_freq(token))
}

fn idf_from_counts(doc_count: usize, n: usize) -> f64 {
    let n = n as f64;
    ((doc_count as f64 - n + 0.5) / (n + 0.5) + 1.0).ln()
}

/// Saturated, length-normalized term frequency shared by both scorers.
#[inline]
fn term_weight(params: &Bm25Params, tf: f64, span_len: f64, avg_len: f64) -> f64 {
    tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * span_len / avg_len))
}

fn count(span_tokens: &[String], token: &str) -> f64 {
    span_tokens.iter().filter(|t| *t == token).count() as f64
}

pub fn okapi_score(stats: &IndexStats, params: &Bm25Params, query_tokens: &[String], span_tokens: &[String]) -> f64 {
    let len = span_tokens.len() as f64;
    query_tokens
        .iter()
        .map(|q| idf(stats, q) * term_weight(params, count(span_tokens, q), len, stats.avg_span_tokens))
        .fold(0.0, |acc, x| acc + x)
}

pub fn plus_score(stats: &IndexStats, params: &Bm25Params, query_tokens: &[String], span_tokens: &[String]) -> f64 {
    let len = span_tokens.len() as f64;
    query_tokens
        .iter()
        .map(|q| idf(stats, q) * (term_weight(params, count(span_tokens, q), len, stats.avg_span_tokens) + params.delta))
        .fold(0.0, |acc, x| acc + x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub span_id: usize,
    pub okapi_score: f64,
    pub plus_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_tokens: Vec<String>,
    /// Sorted by span id.
    pub entries: Vec<Candidate>,
    pub per_scorer_cutoff: usize,
}

impl CandidateSet {
    pub fn empty(query_tokens: Vec<String>, per_scorer_cutoff: usize) -> Self {
        CandidateSet { query_tokens, entries: Vec::new(), per_scorer_cutoff }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Higher score first, then lower span id.
pub fn by_score_desc(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn top_ids(mut scored: Vec<(usize, f64)>, cutoff: usize) -> Vec<usize> {
    scored.sort_by(|a, b| by_score_desc(*a, *b));
    scored.into_iter().take(cutoff).map(|(id, _)| id).collect()
}

fn union_candidates(
    query_tokens: Vec<String>,
    cutoff: usize,
    scored: &[(usize, f64, f64)],
) -> CandidateSet {
    let okapi = top_ids(scored.iter().map(|&(id, o, _)| (id, o)).collect(), cutoff);
    let plus = top_ids(scored.iter().map(|&(id, _, p)| (id, p)).collect(), cutoff);
    let keep: BTreeSet<usize> = okapi.into_iter().chain(plus).collect();
    let by_id: HashMap<usize, (f64, f64)> = scored.iter().map(|&(id, o, p)| (id, (o, p))).collect();
    let entries = keep
        .into_iter()
        .map(|id| {
            let (okapi_score, plus_score) = by_id[&id];
            Candidate { span_id: id, okapi_score, plus_score }
        })
        .collect();
    CandidateSet { query_tokens, entries, per_scorer_cutoff: cutoff }
}

/// Scores of every span, `(okapi, plus)` by span id, by direct evaluation.
pub fn score_all(db: &EvidenceDatabase, params: &Bm25Params, query_tokens: &[String]) -> Vec<(f64, f64)> {
    let stats = db.stats();
    db.records()
        .iter()
        .map(|r| {
            let toks = tokenize(&r.text);
            (okapi_score(stats, params, query_tokens, &toks), plus_score(stats, params, query_tokens, &toks))
        })
        .collect()
}

/// Full-scan pre-fetch; the reference for [`LexicalIndex::prefetch`].
pub fn prefetch_naive(db: &EvidenceDatabase, params: &Bm25Params, query: &str, cutoff: usize) -> CandidateSet {
    let query_tokens = tokenize(query);
    if db.is_empty() || query_tokens.is_empty() {
        return CandidateSet::empty(query_tokens, cutoff);
    }
    let scored: Vec<(usize, f64, f64)> = score_all(db, params, &query_tokens)
        .into_iter()
        .enumerate()
        .map(|(id, (o, p))| (id, o, p))
        .collect();
    union_candidates(query_tokens, cutoff, &scored)
}

/// Token -> postings of `(span_id, term frequency)`, built once per database.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    postings: HashMap<String, Vec<(usize, u32)>>,
    stats: IndexStats,
}

impl LexicalIndex {
    pub fn build(db: &EvidenceDatabase) -> Self {
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        for r in db.records() {
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokenize(&r.text) {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (t, f) in tf {
                postings.entry(t).or_default().push((r.span_id, f));
            }
        }
        for list in postings.values_mut() {
            list.sort_unstable();
        }
        LexicalIndex { postings, stats: db.stats().clone() }
    }

    pub fn stats(&self) -> &IndexStats {
        &self.stats
    }

    /// Same result, bit for bit, as [`prefetch_naive`], touching only the
    /// spans that share a token with the query.
    pub fn prefetch(&self, params: &Bm25Params, query: &str, cutoff: usize) -> CandidateSet {
        self.prefetch_tokens(params, tokenize(query), cutoff)
    }

    pub fn prefetch_tokens(&self, params: &Bm25Params, query_tokens: Vec<String>, cutoff: usize) -> CandidateSet {
        let doc_count = self.stats.doc_count;
        if doc_count == 0 || query_tokens.is_empty() {
            return CandidateSet::empty(query_tokens, cutoff);
        }

        let mut unique: Vec<&str> = Vec::new();
        let slot: Vec<usize> = query_tokens
            .iter()
            .map(|q| match unique.iter().position(|u| *u == q) {
                Some(i) => i,
                None => {
                    unique.push(q);
                    unique.len() - 1
                }
            })
            .collect();

        let mut touched: HashMap<usize, Vec<u32>> = HashMap::new();
        for (j, tok) in unique.iter().enumerate() {
            if let Some(list) = self.postings.get(*tok) {
                for &(sid, f) in list {
                    touched.entry(sid).or_insert_with(|| vec![0; unique.len()])[j] = f;
                }
            }
        }

        let idfs: Vec<f64> = query_tokens.iter().map(|q| idf(&self.stats, q)).collect();
        let avg = self.stats.avg_span_tokens;
        let score = |tfs: Option<&Vec<u32>>, len: f64| -> (f64, f64) {
            let mut okapi = 0.0;
            let mut plus = 0.0;
            for (i, &w) in idfs.iter().enumerate() {
                let f = tfs.map_or(0.0, |v| v[slot[i]] as f64);
                let frac = term_weight(params, f, len, avg);
                okapi += w * frac;
                plus += w * (frac + params.delta);
            }
            (okapi, plus)
        };

        let mut scored: Vec<(usize, f64, f64)> = touched
            .iter()
            .map(|(&sid, tfs)| {
                let (o, p) = score(Some(tfs), self.stats.span_lengths[sid] as f64);
                (sid, o, p)
            })
            .collect();
        // Untouched spans all score (0, base); only the lowest ids can make a cut.
        let filler = (0..doc_count).filter(|id| !touched.contains_key(id)).take(cutoff);
        for sid in filler {
            let (o, p) = score(None, self.stats.span_lengths[sid] as f64);
            scored.push((sid, o, p));
        }
        union_candidates(query_tokens, cutoff, &scored)
    }
}
