//! Paper aggregation and the end-to-end recommendation pipeline.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::db::{EvidenceDatabase, PaperMetadata};
use crate::embed::EmbeddingProvider;
use crate::error::PipelineError;
use crate::prefetch::{Bm25Params, LexicalIndex, DEFAULT_CUTOFF};
use crate::rerank::{rerank, RankedEvidence, RerankConfig, Route};

pub const DEFAULT_K: usize = 10;

/// A candidate paper with its ranking keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperAggregate {
    pub paper_id: String,
    /// Best (lowest) rank among candidate spans citing the paper.
    pub best_rank: usize,
    /// Summed support across candidate spans citing the paper.
    pub total_support: u64,
    /// Publication year; 0 when unknown.
    pub year: u32,
    pub best_span_id: usize,
    /// Every candidate span citing the paper as `(span_id, rank, support)`,
    /// best rank first.
    pub evidence: Vec<(usize, usize, u64)>,
}

/// Collects every paper cited by a ranked span.
///
/// Output is sorted by paper id.
pub fn aggregate(ranked: &RankedEvidence, db: &EvidenceDatabase) -> Vec<PaperAggregate> {
    let mut by_paper: BTreeMap<&str, PaperAggregate> = BTreeMap::new();
    for entry in &ranked.entries {
        let Some(record) = db.record(entry.span_id) else { continue };
        for c in &record.citations {
            let agg = by_paper.entry(&c.paper_id).or_insert_with(|| PaperAggregate {
                paper_id: c.paper_id.clone(),
                best_rank: usize::MAX,
                total_support: 0,
                year: db.paper(&c.paper_id).map_or(0, |p| p.year),
                best_span_id: entry.span_id,
                evidence: Vec::new(),
            });
            if entry.rank < agg.best_rank {
                agg.best_rank = entry.rank;
                agg.best_span_id = entry.span_id;
            }
            agg.total_support += c.support;
            agg.evidence.push((entry.span_id, entry.rank, c.support));
        }
    }
    by_paper
        .into_values()
        .map(|mut a| {
            a.evidence.sort_by_key(|&(id, rank, _)| (rank, id));
            a
        })
        .collect()
}

/// Best rank ascending, then support descending, then year descending
/// (unknown last), then paper id.
pub fn paper_order(a: &PaperAggregate, b: &PaperAggregate) -> Ordering {
    a.best_rank
        .cmp(&b.best_rank)
        .then(b.total_support.cmp(&a.total_support))
        .then(b.year.cmp(&a.year))
        .then_with(|| a.paper_id.cmp(&b.paper_id))
}

pub fn rank_papers(mut aggregates: Vec<PaperAggregate>) -> Vec<PaperAggregate> {
    aggregates.sort_by(paper_order);
    aggregates
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub bm25: Bm25Params,
    pub per_scorer_cutoff: usize,
    pub rerank: RerankConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { bm25: Bm25Params::default(), per_scorer_cutoff: DEFAULT_CUTOFF, rerank: RerankConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperView {
    pub id: String,
    pub title: String,
    pub year: Option<u32>,
    pub venue: String,
    pub authors: Vec<String>,
}

impl PaperView {
    fn new(id: &str, meta: Option<&PaperMetadata>) -> Self {
        match meta {
            Some(p) => PaperView {
                id: p.paper_id.clone(),
                title: p.title.clone(),
                year: (p.year > 0).then_some(p.year),
                venue: p.venue.clone(),
                authors: p.authors.clone(),
            },
            None => PaperView { id: id.to_string(), title: String::new(), year: None, venue: String::new(), authors: vec![] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportingSpan {
    pub span_id: usize,
    pub evidence: String,
    pub rank: usize,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rank: usize,
    pub paper: PaperView,
    /// The best-ranked span citing the paper.
    pub evidence: String,
    pub span_id: usize,
    pub p_r: usize,
    pub p_s: u64,
    /// Component scores and ranks of `span_id`.
    pub scores: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, usize>,
    pub supporting: Vec<SupportingSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationPayload {
    pub query: String,
    pub route: Route,
    pub results: Vec<Recommendation>,
}

impl RecommendationPayload {
    /// The JSON shared by every transport.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("payload serializes")
    }
}

/// A loaded database with its lexical index, ready to answer queries.
pub struct Recommender {
    db: EvidenceDatabase,
    index: LexicalIndex,
    config: PipelineConfig,
    provider: Box<dyn EmbeddingProvider>,
}

impl Recommender {
    pub fn new(db: EvidenceDatabase, config: PipelineConfig, provider: Box<dyn EmbeddingProvider>) -> Self {
        let index = LexicalIndex::build(&db);
        Recommender { db, index, config, provider }
    }

    pub fn db(&self) -> &EvidenceDatabase {
        &self.db
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Pre-fetch and re-rank the evidence spans for `query`.
    pub fn rank_evidence(&self, query: &str) -> Result<RankedEvidence, PipelineError> {
        let candidates = self.index.prefetch(&self.config.bm25, query, self.config.per_scorer_cutoff);
        rerank(&self.db, &candidates, query, &self.config.rerank, self.provider.as_ref())
    }

    /// Every candidate paper, best first.
    pub fn rank_all_papers(&self, query: &str) -> Result<(RankedEvidence, Vec<PaperAggregate>), PipelineError> {
        let ranked = self.rank_evidence(query)?;
        let papers = rank_papers(aggregate(&ranked, &self.db));
        Ok((ranked, papers))
    }

    /// The top `k` papers, each paired with its best-ranked evidence span.
    pub fn recommend(&self, query: &str, k: usize) -> Result<RecommendationPayload, PipelineError> {
        let (ranked, papers) = self.rank_all_papers(query)?;
        let by_span: BTreeMap<usize, _> = ranked.entries.iter().map(|e| (e.span_id, e)).collect();
        let text = |id: usize| self.db.record(id).map_or(String::new(), |r| r.text.clone());
        let results = papers
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, agg)| {
                let span = by_span[&agg.best_span_id];
                Recommendation {
                    rank: i + 1,
                    paper: PaperView::new(&agg.paper_id, self.db.paper(&agg.paper_id)),
                    evidence: text(agg.best_span_id),
                    span_id: agg.best_span_id,
                    p_r: agg.best_rank,
                    p_s: agg.total_support,
                    scores: span.component_scores.clone(),
                    ranks: span.component_ranks.clone(),
                    supporting: agg
                        .evidence
                        .iter()
                        .map(|&(span_id, rank, support)| SupportingSpan { span_id, evidence: text(span_id), rank, support })
                        .collect(),
                }
            })
            .collect();
        Ok(RecommendationPayload { query: query.to_string(), route: ranked.route, results })
    }
}
